/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_curves: (a: number, b: number) => [number, number, number, number];
export const demo_explore: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const demo_new: (a: bigint, b: number, c: number) => [number, number, number];
export const demo_rank: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const demo_rankText: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
export const demo_registrationText: (a: number, b: number, c: number) => [number, number, number, number];
export const demo_registrations: (a: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
