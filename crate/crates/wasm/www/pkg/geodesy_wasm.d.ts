/* tslint:disable */
/* eslint-disable */

/**
 * Passage time from `(sx, sy)` to `(tx, ty)` with the geodesic drawn over a heat map
 * of times to the target.
 */
export class PassageView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly svg: string;
    readonly time: number;
}

export function partition_svg(seed: number, radius: number, kind: string, p1: number, p2: number, seeds: string): string;

export function passage_view(seed: number, radius: number, kind: string, p1: number, p2: number, sx: number, sy: number, tx: number, ty: number): PassageView;

export function tree_svg(seed: number, radius: number, kind: string, p1: number, p2: number, highlight: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_passageview_free: (a: number, b: number) => void;
    readonly partition_svg: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly passage_view: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number];
    readonly passageview_svg: (a: number) => [number, number];
    readonly passageview_time: (a: number) => number;
    readonly tree_svg: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
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
