/* tslint:disable */
/* eslint-disable */

export function apply_eval_prompt(benchmark: string, question: string): string;

/**
 * Batch sequence for a synthetic mixture of `visual` image records and `text` text-only records.
 */
export function batch_preview(visual: number, text: number, batch_size: number, seed: number): string;

/**
 * Names of the built-in evaluation benchmarks.
 */
export function benchmarks(): string;

/**
 * Tiling plan, feature layout and the score of every candidate grid.
 */
export function plan_image(width: number, height: number, tile_side: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly apply_eval_prompt: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly batch_preview: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly benchmarks: () => [number, number];
    readonly plan_image: (a: number, b: number, c: number) => [number, number, number, number];
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
