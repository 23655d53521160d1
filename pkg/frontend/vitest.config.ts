import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // The integration suite drives a live bridge server in real time.
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
