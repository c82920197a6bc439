/* tslint:disable */
/* eslint-disable */

/**
 * Builds a circuit, evaluates it on a seeded stream and reports its
 * shape. `problem` is f2, f0, mvmult or pmww; `gates` e.g. "pow8+bigsum".
 */
export function circuit_summary(problem: string, n: number, q: number, gates: string, seed: number): string;

/**
 * Proves and checks F2 of `m` random items over universe `n`. A nonzero
 * `corrupt` is added to proof element `corrupt_at` before checking.
 */
export function f2_proof(n: number, m: number, seed: number, fft: boolean, corrupt: number, corrupt_at: number): string;

/**
 * Matrix-vector product of a random `side x side` system with grid
 * exponent `alpha_num / alpha_den`. A nonzero `corrupt` is added to the
 * first entry of the claimed product.
 */
export function mvmult_proof(side: number, alpha_num: number, alpha_den: number, seed: number, corrupt: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly circuit_summary: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number];
    readonly f2_proof: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly mvmult_proof: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
