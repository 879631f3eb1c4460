import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["test/**/*.test.ts"],
    // the round-trip suite drives a live gateway process
    testTimeout: 30_000,
    hookTimeout: 60_000,
    pool: "forks",
  },
});
