/// <reference types="vitest" />
import { defineConfig } from 'vite';

// The gateway serves the built bundle at /admin/ui.
export default defineConfig({
  base: '/admin/ui/',
  test: {
    environment: 'node',
    testTimeout: 60000,
    hookTimeout: 60000,
  },
});
