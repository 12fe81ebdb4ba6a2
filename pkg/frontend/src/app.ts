/**
 * Review screen shell: renders the current task, wires keyboard shortcuts,
 * and advances the queue after each verdict. One screen, one queue, no
 * framework.
 */

import { ApiClient, Progress } from "./api.js";
import {
  CRITERIA,
  CRITERIA_LABELS,
  CriterionKey,
  TaskViewState,
  canSubmit,
  computeAccept,
  freshCriteria,
  initialState,
  keyToAction,
  verdictBody,
} from "./logic.js";

const PROGRESS_POLL_MS = 15000;

function annotatorName(): string {
  const stored = localStorage.getItem("annotator");
  if (stored) return stored;
  const name = window.prompt("Annotator name:") || "anonymous";
  localStorage.setItem("annotator", name);
  return name;
}

export class ReviewApp {
  state: TaskViewState = initialState();
  private annotator: string;

  constructor(private api: ApiClient, private root: HTMLElement, annotator?: string) {
    this.annotator = annotator ?? annotatorName();
    document.addEventListener("keydown", (e) => this.onKey(e));
  }

  async start(): Promise<void> {
    await this.loadNext();
    this.pollProgress();
    setInterval(() => this.pollProgress(), PROGRESS_POLL_MS);
  }

  async loadNext(): Promise<void> {
    try {
      const res = await this.api.nextTask(this.annotator);
      this.state = {
        ...initialState(),
        task: res.task,
        done: res.done,
      };
      this.state.criteria = freshCriteria();
    } catch (err) {
      this.state.error = `Could not reach the review service: ${err}`;
    }
    this.render();
  }

  onKey(e: KeyboardEvent): void {
    const target = e.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "TEXTAREA")) return;
    const action = keyToAction(e.key);
    if (!action) return;
    e.preventDefault();
    if (action.kind === "toggle") this.toggle(action.criterion);
    else void this.submit();
  }

  toggle(criterion: CriterionKey): void {
    if (!this.state.task) return;
    const current = this.state.criteria[criterion];
    this.state.criteria = { ...this.state.criteria, [criterion]: current === null ? true : !current };
    this.render();
  }

  async submit(): Promise<void> {
    if (!canSubmit(this.state)) return;
    this.state.submitting = true;
    this.render();
    try {
      const stored = await this.api.submitVerdict(verdictBody(this.state, this.annotator));
      // server recomputation wins over the client's accept claim
      this.state.criteria = freshCriteria();
      void stored.accept;
      await this.loadNext();
    } catch (err) {
      // keep local criteria so nothing is lost on a rejected post
      this.state.submitting = false;
      this.state.error = `Submit failed: ${err}`;
      this.render();
    }
  }

  private async pollProgress(): Promise<void> {
    try {
      const progress = await this.api.progress();
      this.renderProgress(progress);
    } catch {
      // banner already covers connectivity problems on task loads
    }
  }

  private renderProgress(p: Progress): void {
    const bar = this.root.querySelector("#progress");
    if (!bar) return;
    const pct = p.total ? Math.round((100 * p.resolved) / p.total) : 0;
    const retention = p.retention_rate === null ? "–" : `${Math.round(100 * p.retention_rate)}%`;
    bar.textContent = `${p.resolved}/${p.total} reviewed (${pct}%), retention ${retention}`;
  }

  render(): void {
    const s = this.state;
    if (s.error) {
      this.root.innerHTML = `
        <div class="banner error">${escapeHtml(s.error)}
          <button id="retry">Retry</button></div>`;
      this.root.querySelector("#retry")!.addEventListener("click", () => this.loadNext());
      return;
    }
    if (!s.task) {
      this.root.innerHTML = `
        <div class="completion">
          <h1>Queue complete</h1>
          <p id="progress"></p>
        </div>`;
      this.pollProgress();
      return;
    }
    const t = s.task;
    const options = t.options
      .map((o) => {
        const gold = o.letter === t.answer_letter ? " gold" : "";
        return `<li class="option${gold}"><span class="letter">${o.letter}</span> ${escapeHtml(o.text)}</li>`;
      })
      .join("");
    const criteria = CRITERIA.map((k, i) => {
      const val = s.criteria[k];
      const cls = val === null ? "unset" : val ? "yes" : "no";
      const mark = val === null ? "?" : val ? "✓" : "✗";
      return `<li class="criterion ${cls}" data-criterion="${k}">
        <kbd>${i + 1}</kbd> ${CRITERIA_LABELS[k]} <span class="mark">${mark}</span></li>`;
    }).join("");
    const acceptBadge = computeAccept(s.criteria)
      ? '<span class="badge accept">will accept</span>'
      : canSubmit(s) ? '<span class="badge reject">will reject</span>' : "";
    this.root.innerHTML = `
      <header><span id="progress"></span></header>
      <main>
        <img src="${t.image_url}" alt="figure under review"
             onerror="this.classList.add('missing'); this.src='placeholder.svg'">
        <section class="qa">
          <h2>${escapeHtml(t.question)}</h2>
          <ul class="options">${options}</ul>
        </section>
        <section class="criteria">
          <ul>${criteria}</ul>
          <button id="submit" ${canSubmit(s) ? "" : "disabled"}>
            Submit (Enter)</button> ${acceptBadge}
        </section>
      </main>`;
    this.root.querySelectorAll<HTMLElement>(".criterion").forEach((el) =>
      el.addEventListener("click", () => this.toggle(el.dataset.criterion as CriterionKey)));
    this.root.querySelector("#submit")!.addEventListener("click", () => this.submit());
  }
}

function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (c) =>
    ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;", "'": "&#39;" }[c] as string));
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const app = new ReviewApp(new ApiClient(), document.getElementById("app")!);
  void app.start();
}
