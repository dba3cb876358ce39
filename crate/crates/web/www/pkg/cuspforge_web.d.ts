/* tslint:disable */
/* eslint-disable */

/**
 * Samples `f(t) = vol((1 - t) p + t q)` and `f'(t)` on `(0, 1)`, where `p`
 * is the volume maximizer and `q` a random point of the closure.
 *
 * Returns `[t0, f0, df0, t1, f1, df1, ...]`.
 */
export function segment_profile(tri_text: string, seed: bigint, samples: number): Float64Array;

/**
 * Maximizes the volume for a `.tri` source and returns the result as JSON.
 */
export function solve(tri_text: string): string;

/**
 * Decorated ideal tetrahedron with dihedral angles `alpha`, `beta` and
 * `pi - alpha - beta`, and horosphere parameters `exp(logs[v])`.
 *
 * Returns the vertex positions, edge lengths and the residuals of the
 * length identities as JSON.
 */
export function tetrahedron(alpha: number, beta: number, logs: Float64Array): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly segment_profile: (a: number, b: number, c: bigint, d: number) => [number, number, number, number];
    readonly solve: (a: number, b: number) => [number, number, number, number];
    readonly tetrahedron: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
