import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    globalSetup: ["./tests/global-setup.ts"],
    // every file talks to the one shared service process; keep them serial
    fileParallelism: false,
    testTimeout: 20000,
    hookTimeout: 60000,
  },
});
