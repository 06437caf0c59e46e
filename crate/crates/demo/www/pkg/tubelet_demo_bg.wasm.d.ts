/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const fusion_demo: (a: number, b: number, c: number, d: number) => [number, number];
export const iou_demo: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number];
export const link_demo: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
