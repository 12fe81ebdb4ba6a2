import { describe, expect, it } from "vitest";

import {
  CRITERIA,
  allCriteriaSet,
  canSubmit,
  computeAccept,
  freshCriteria,
  initialState,
  keyToAction,
  toggleCriterion,
  verdictBody,
  type ReviewTask,
} from "../src/logic.js";

const TASK: ReviewTask = {
  pair_id: "p01",
  record_id: "rec0001",
  image_url: "/media/rec0001.png",
  question: "What does the arrow indicate?",
  options: [
    { letter: "A", text: "inflow" },
    { letter: "B", text: "outflow" },
    { letter: "C", text: "recirculation" },
    { letter: "D", text: "stagnation" },
  ],
  answer_letter: "B",
};

describe("criteria toggling", () => {
  it("starts fully unset", () => {
    const c = freshCriteria();
    for (const k of CRITERIA) expect(c[k]).toBeNull();
    expect(allCriteriaSet(c)).toBe(false);
  });

  it("first press sets true, further presses flip", () => {
    let c = freshCriteria();
    c = toggleCriterion(c, "distractors_adequate");
    expect(c.distractors_adequate).toBe(true);
    c = toggleCriterion(c, "distractors_adequate");
    expect(c.distractors_adequate).toBe(false);
    c = toggleCriterion(c, "distractors_adequate");
    expect(c.distractors_adequate).toBe(true);
  });

  it("toggling one criterion leaves the others untouched", () => {
    const c = toggleCriterion(freshCriteria(), "image_quality_ok");
    expect(c.question_image_answerable).toBeNull();
    expect(c.distractors_adequate).toBeNull();
  });
});

describe("submit gating", () => {
  it("requires a task and every criterion explicitly set", () => {
    const view = initialState();
    expect(canSubmit(view)).toBe(false);
    view.task = TASK;
    expect(canSubmit(view)).toBe(false);
    for (const k of CRITERIA) view.criteria = toggleCriterion(view.criteria, k);
    expect(canSubmit(view)).toBe(true);
  });

  it("is blocked while a submit is in flight", () => {
    const view = initialState();
    view.task = TASK;
    for (const k of CRITERIA) view.criteria = toggleCriterion(view.criteria, k);
    view.submitting = true;
    expect(canSubmit(view)).toBe(false);
  });

  it("an explicit false still counts as set", () => {
    const view = initialState();
    view.task = TASK;
    for (const k of CRITERIA) view.criteria = toggleCriterion(view.criteria, k);
    view.criteria = toggleCriterion(view.criteria, "image_quality_ok"); // -> false
    expect(canSubmit(view)).toBe(true);
    expect(computeAccept(view.criteria)).toBe(false);
  });
});

describe("accept computation", () => {
  it("is the conjunction of the three criteria", () => {
    for (let bits = 0; bits < 8; bits++) {
      let c = freshCriteria();
      CRITERIA.forEach((k, i) => {
        c = toggleCriterion(c, k); // true
        if (!((bits >> i) & 1)) c = toggleCriterion(c, k); // flip to false
      });
      expect(computeAccept(c)).toBe(bits === 7);
    }
  });
});

describe("keyboard map", () => {
  it("digits 1-3 toggle the criteria in display order", () => {
    expect(keyToAction("1")).toEqual({ kind: "toggle", criterion: CRITERIA[0] });
    expect(keyToAction("2")).toEqual({ kind: "toggle", criterion: CRITERIA[1] });
    expect(keyToAction("3")).toEqual({ kind: "toggle", criterion: CRITERIA[2] });
  });

  it("Enter submits and everything else is inert", () => {
    expect(keyToAction("Enter")).toEqual({ kind: "submit" });
    expect(keyToAction("4")).toBeNull();
    expect(keyToAction("a")).toBeNull();
    expect(keyToAction("Escape")).toBeNull();
  });
});

describe("verdict payload", () => {
  it("refuses incomplete criteria", () => {
    const view = initialState();
    view.task = TASK;
    expect(() => verdictBody(view, "alice")).toThrow();
  });

  it("carries the pair id, annotator, criteria, and accept bit", () => {
    const view = initialState();
    view.task = TASK;
    for (const k of CRITERIA) view.criteria = toggleCriterion(view.criteria, k);
    view.criteria = toggleCriterion(view.criteria, "distractors_adequate");
    const body = verdictBody(view, "alice");
    expect(body).toEqual({
      pair_id: "p01",
      annotator: "alice",
      criteria: {
        question_image_answerable: true,
        distractors_adequate: false,
        image_quality_ok: true,
      },
      accept: false,
    });
  });
});
