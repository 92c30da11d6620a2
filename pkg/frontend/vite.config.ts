/// <reference types="vitest/config" />
import { defineConfig } from "vite";

export default defineConfig({
  build: {
    outDir: "dist",
    target: "es2022",
  },
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
    // the equivalence suite boots a real gateway process
    testTimeout: 30_000,
    hookTimeout: 60_000,
  },
});
