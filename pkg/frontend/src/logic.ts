/**
 * Pure state for the review screen: criteria toggles, submit gating, and
 * the keyboard shortcut map. No DOM, no network — the app shell renders
 * this state and the tests drive it directly.
 */

export type CriterionKey =
  | "question_image_answerable"
  | "distractors_adequate"
  | "image_quality_ok";

export const CRITERIA: CriterionKey[] = [
  "question_image_answerable",
  "distractors_adequate",
  "image_quality_ok",
];

export const CRITERIA_LABELS: Record<CriterionKey, string> = {
  question_image_answerable: "Question is answerable from the image",
  distractors_adequate: "Distractors are hard enough to prevent guessing",
  image_quality_ok: "Image quality is usable (not a chart/flow collage)",
};

export interface TaskOption {
  letter: string;
  text: string;
}

export interface ReviewTask {
  pair_id: string;
  record_id: string;
  image_url: string;
  question: string;
  options: TaskOption[];
  answer_letter: string;
}

/** tri-state: unset until the annotator explicitly decides */
export type CriteriaState = Record<CriterionKey, boolean | null>;

export interface TaskViewState {
  task: ReviewTask | null;
  criteria: CriteriaState;
  submitting: boolean;
  done: boolean;
  error: string | null;
}

export function freshCriteria(): CriteriaState {
  return {
    question_image_answerable: null,
    distractors_adequate: null,
    image_quality_ok: null,
  };
}

export function initialState(): TaskViewState {
  return { task: null, criteria: freshCriteria(), submitting: false, done: false, error: null };
}

/** unset -> true, then flip on every further press */
export function toggleCriterion(state: CriteriaState, key: CriterionKey): CriteriaState {
  const current = state[key];
  return { ...state, [key]: current === null ? true : !current };
}

export function allCriteriaSet(state: CriteriaState): boolean {
  return CRITERIA.every((k) => state[k] !== null);
}

/** submit is enabled only once every criterion is explicitly set */
export function canSubmit(view: TaskViewState): boolean {
  return view.task !== null && !view.submitting && allCriteriaSet(view.criteria);
}

/** the accept bit is the AND of the three criteria; server recomputes it */
export function computeAccept(state: CriteriaState): boolean {
  return CRITERIA.every((k) => state[k] === true);
}

export type KeyAction =
  | { kind: "toggle"; criterion: CriterionKey }
  | { kind: "submit" };

/** keys 1/2/3 toggle the criteria in order, Enter submits */
export function keyToAction(key: string): KeyAction | null {
  const idx = ["1", "2", "3"].indexOf(key);
  if (idx >= 0) return { kind: "toggle", criterion: CRITERIA[idx] };
  if (key === "Enter") return { kind: "submit" };
  return null;
}

export function verdictBody(view: TaskViewState, annotator: string) {
  if (!view.task || !allCriteriaSet(view.criteria)) {
    throw new Error("verdict requires a task and fully set criteria");
  }
  const criteria: Record<string, boolean> = {};
  for (const k of CRITERIA) criteria[k] = view.criteria[k] as boolean;
  return {
    pair_id: view.task.pair_id,
    annotator,
    criteria,
    accept: computeAccept(view.criteria),
  };
}
