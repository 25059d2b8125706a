import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    environment: "node",
    // the export contract test shells out to the primary CLI twice
    testTimeout: 60_000,
  },
});
