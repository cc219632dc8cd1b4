export * from "./types.js";
export * from "./coords.js";
export * from "./client.js";
export * from "./capture.js";
export * from "./mirror.js";
export * from "./toolbar.js";
export * from "./wpm.js";
