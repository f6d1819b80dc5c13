import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // the end-to-end test boots the Python service and drives a live session
    testTimeout: 30000,
    hookTimeout: 30000,
  },
});
