/* tslint:disable */
/* eslint-disable */

/**
 * Plans a batch of trips together. `mode` is `fair-coplan`, `coplan` or
 * `tfmp`; `gamma` weighs fairness in fair-coplan.
 */
export function deconflict(closed: Uint32Array, trips: Uint32Array, mode: string, gamma: number): string;

/**
 * Fairness value of path lengths before and after deconfliction.
 */
export function fairness(before: Uint32Array, after: Uint32Array): number;

/**
 * Grid size, horizon and vertiport cells as JSON.
 */
export function layout(): string;

/**
 * Plans a single flight between two vertiports (indices into the layout).
 */
export function plan_flight(closed: Uint32Array, origin: number, destination: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly deconflict: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly fairness: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly layout: () => [number, number];
    readonly plan_flight: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __externref_table_alloc: () => number;
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
