/**
 * Stage dependency graph mirrored from the service, used to render the
 * workflow diagram with stale badges.  The service is the source of truth
 * for freshness; this module predicts which badges flip when the user
 * edits seeds, strokes or parameters so the UI can update optimistically
 * before the next poll.
 */

import type { StageName } from "./params.js";

export const STAGE_PARENTS: Record<StageName, StageName[]> = {
  d1: [],
  labels: [],
  damage: ["d1", "labels"],
  tv: ["damage"],
  result: ["damage", "tv"],
};

export type Mutation = "seeds" | "strokes" | StageName;

function children(stage: StageName): StageName[] {
  return (Object.keys(STAGE_PARENTS) as StageName[]).filter((s) =>
    STAGE_PARENTS[s].includes(stage),
  );
}

/** The stage set whose artifacts a mutation invalidates (downstream only). */
export function invalidatedBy(mutation: Mutation): Set<StageName> {
  let roots: StageName[];
  if (mutation === "seeds") roots = ["d1"];
  else if (mutation === "strokes") roots = ["damage"];
  else roots = [mutation];

  const stale = new Set<StageName>();
  const queue = [...roots];
  while (queue.length) {
    const stage = queue.pop()!;
    if (stale.has(stage)) continue;
    stale.add(stage);
    queue.push(...children(stage));
  }
  return stale;
}

export interface StageBadge {
  stage: StageName;
  fresh: boolean;
  runnable: boolean;
}

/** Badge states from the service's freshness report. */
export function badges(fresh: Record<StageName, boolean>): StageBadge[] {
  return (Object.keys(STAGE_PARENTS) as StageName[]).map((stage) => ({
    stage,
    fresh: fresh[stage],
    runnable: STAGE_PARENTS[stage].every((parent) => fresh[parent]),
  }));
}
