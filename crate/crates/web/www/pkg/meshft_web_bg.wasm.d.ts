/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_maxwellrun_free: (a: number, b: number) => void;
export const __wbg_meshview_free: (a: number, b: number) => void;
export const __wbg_wavesim_free: (a: number, b: number) => void;
export const maxwellrun_dt: (a: number) => number;
export const maxwellrun_energy: (a: number) => [number, number];
export const maxwellrun_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const maxwellrun_signed_charge: (a: number) => [number, number];
export const maxwellrun_unsigned_charge: (a: number) => [number, number];
export const meshview_n_edges: (a: number) => number;
export const meshview_n_faces: (a: number) => number;
export const meshview_n_nodes: (a: number) => number;
export const meshview_new: (a: number, b: number) => [number, number, number];
export const meshview_segments: (a: number) => [number, number];
export const meshview_weights: (a: number) => [number, number];
export const wavesim_advance: (a: number, b: number) => number;
export const wavesim_energy: (a: number) => number;
export const wavesim_energy_drift: (a: number) => number;
export const wavesim_field: (a: number) => [number, number];
export const wavesim_momentum_change: (a: number) => number;
export const wavesim_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const wavesim_omega_max: (a: number) => number;
export const wavesim_positions: (a: number) => [number, number];
export const wavesim_time: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
