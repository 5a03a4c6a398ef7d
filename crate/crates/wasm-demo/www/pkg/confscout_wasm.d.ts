/* tslint:disable */
/* eslint-disable */

/**
 * Comparison explorer: synthesize `n_runs` paired gammas where the
 * candidate beats the baseline by `advantage` on average with per-run
 * spread `spread`, then show the win counts and improvement histogram.
 */
export function comparison_explorer(n_runs: number, seed: number, advantage: number, spread: number): string;

/**
 * Primal-dual integral explorer. `events_json` is `[[t, primal|null, dual],
 * ...]`; the integral runs to `horizon` with the gap capped at `gap_cap`.
 */
export function integral_explorer(events_json: string, gap_cap: number, horizon: number): string;

/**
 * Greedy portfolio explorer: measure a synthetic instance set over the
 * synthetic solver's 8 configurations, build the greedy chain and choose
 * the portfolio size at `epsilon`.
 */
export function portfolio_explorer(n_per_family: number, seed: number, epsilon: number, noise: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly comparison_explorer: (a: number, b: number, c: number, d: number) => [number, number];
    readonly integral_explorer: (a: number, b: number, c: number, d: number) => [number, number];
    readonly portfolio_explorer: (a: number, b: number, c: number, d: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
