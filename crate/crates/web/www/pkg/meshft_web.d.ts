/* tslint:disable */
/* eslint-disable */

/**
 * Traces of one TE Maxwell run with randomized stars.
 */
export class MaxwellRun {
    free(): void;
    [Symbol.dispose](): void;
    dt(): number;
    /**
     * Energy relative to the initial energy, per step.
     */
    energy(): Float64Array;
    constructor(n: number, steps: number, spread: number, seed: number);
    /**
     * `‖D0ᵀD_t − D0ᵀD_0‖∞` per step with signed coupling.
     */
    signed_charge(): Float64Array;
    /**
     * Same with the orientation-blind coupling.
     */
    unsigned_charge(): Float64Array;
}

/**
 * Edges of a mesh as minimum-image segments.
 */
export class MeshView {
    free(): void;
    [Symbol.dispose](): void;
    n_edges(): number;
    n_faces(): number;
    n_nodes(): number;
    constructor(spec: string);
    /**
     * `x0, y0, x1, y1` per edge.
     */
    segments(): Float64Array;
    /**
     * Theory edge weights `c²·V1⁻¹`, one per edge.
     */
    weights(): Float64Array;
}

/**
 * Plane wave on a periodic mesh under the theory stars.
 */
export class WaveSim {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Advances by `frames` data steps; returns false once the state is no
     * longer finite.
     */
    advance(frames: number): boolean;
    /**
     * `½pᵀM⁻¹p + ½(Gq)ᵀW(Gq)` of the running system.
     */
    energy(): number;
    /**
     * `|E(t) − E(0)| / E(0)`.
     */
    energy_drift(): number;
    /**
     * Displacement per node.
     */
    field(): Float64Array;
    /**
     * `|Σp(t) − Σp(0)|`.
     */
    momentum_change(): number;
    constructor(mesh: string, variant: string, kx: number, ky: number, seed: number);
    omega_max(): number;
    /**
     * `x, y` per node.
     */
    positions(): Float64Array;
    time(): number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_maxwellrun_free: (a: number, b: number) => void;
    readonly __wbg_meshview_free: (a: number, b: number) => void;
    readonly __wbg_wavesim_free: (a: number, b: number) => void;
    readonly maxwellrun_dt: (a: number) => number;
    readonly maxwellrun_energy: (a: number) => [number, number];
    readonly maxwellrun_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly maxwellrun_signed_charge: (a: number) => [number, number];
    readonly maxwellrun_unsigned_charge: (a: number) => [number, number];
    readonly meshview_n_edges: (a: number) => number;
    readonly meshview_n_faces: (a: number) => number;
    readonly meshview_n_nodes: (a: number) => number;
    readonly meshview_new: (a: number, b: number) => [number, number, number];
    readonly meshview_segments: (a: number) => [number, number];
    readonly meshview_weights: (a: number) => [number, number];
    readonly wavesim_advance: (a: number, b: number) => number;
    readonly wavesim_energy: (a: number) => number;
    readonly wavesim_energy_drift: (a: number) => number;
    readonly wavesim_field: (a: number) => [number, number];
    readonly wavesim_momentum_change: (a: number) => number;
    readonly wavesim_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly wavesim_omega_max: (a: number) => number;
    readonly wavesim_positions: (a: number) => [number, number];
    readonly wavesim_time: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
