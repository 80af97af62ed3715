/**
 * Stage parameter forms, pre-filled with the pipeline's published
 * defaults: 35 k-means labels with 5 restarts, TV fidelity weight 1000
 * with 1000 iterations, 7x7 patches with 12 propagation iterations.
 * Keys mirror the service's stage parameter schema one to one.
 */

export type StageName = "d1" | "labels" | "damage" | "tv" | "result";

export type StageParams = Record<string, number>;

export const STAGE_DEFAULTS: Record<StageName, StageParams> = {
  d1: { mu: 0.2, nu: 0.0, lambda1: 1.0, lambda2: 1.0, max_iter: 1000, tol: 0.0 },
  labels: { k: 35, restarts: 5, rng_seed: 0 },
  damage: { min_overlap: 0.05, min_area: 20, closing_radius: 2 },
  tv: { lam: 1000.0, max_iter: 1000, tol: 1e-5 },
  result: { patch_side: 7, propagation_iters: 12, scales: 2, rng_seed: 0 },
};

export const STAGE_ORDER: StageName[] = ["d1", "labels", "damage", "tv", "result"];

/** Payload for a stage run, with form overrides merged over the defaults. */
export function buildRunPayload(
  stage: StageName,
  overrides: Partial<StageParams> = {},
): { params: StageParams } {
  const params = { ...STAGE_DEFAULTS[stage] };
  for (const [key, value] of Object.entries(overrides)) {
    if (!(key in params)) throw new Error(`unknown parameter ${key} for stage ${stage}`);
    if (typeof value !== "number" || !Number.isFinite(value)) {
      throw new Error(`parameter ${key} must be a finite number`);
    }
    params[key] = value;
  }
  return { params };
}
