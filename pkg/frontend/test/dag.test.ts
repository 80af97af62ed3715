import { describe, expect, it } from "vitest";

import { STAGE_PARENTS, badges, invalidatedBy } from "../src/dag.js";

describe("stage DAG", () => {
  it("seed edits invalidate d1 and its descendants but never labels", () => {
    const stale = invalidatedBy("seeds");
    expect(stale).toEqual(new Set(["d1", "damage", "tv", "result"]));
  });

  it("stroke edits invalidate damage and downstream only", () => {
    const stale = invalidatedBy("strokes");
    expect(stale).toEqual(new Set(["damage", "tv", "result"]));
  });

  it("parameter changes invalidate the stage and its descendants", () => {
    expect(invalidatedBy("labels")).toEqual(new Set(["labels", "damage", "tv", "result"]));
    expect(invalidatedBy("tv")).toEqual(new Set(["tv", "result"]));
    expect(invalidatedBy("result")).toEqual(new Set(["result"]));
  });

  it("never invalidates upstream stages", () => {
    for (const mutation of ["seeds", "strokes", "damage", "tv", "result"] as const) {
      const stale = invalidatedBy(mutation);
      for (const stage of stale) {
        for (const parent of STAGE_PARENTS[stage]) {
          if (!stale.has(parent)) {
            // A stale stage may have fresh parents, but a fresh stage must
            // never sit below a stale one.
            expect(invalidatedBy(parent).has(stage)).toBe(true);
          }
        }
      }
    }
  });

  it("badges mark stages runnable only when parents are fresh", () => {
    const report = badges({ d1: true, labels: false, damage: false, tv: false, result: false });
    const byStage = Object.fromEntries(report.map((b) => [b.stage, b]));
    expect(byStage.d1.runnable).toBe(true);
    expect(byStage.damage.runnable).toBe(false); // labels stale
    expect(byStage.tv.runnable).toBe(false);
  });
});
