import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    // every binding test shells out to the grid generator; reversal runs
    // plus interpreter start-up take well over the default 5s
    testTimeout: 180_000,
    hookTimeout: 60_000,
  },
});
