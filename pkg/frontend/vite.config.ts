import { defineConfig } from "vite";

// the dev server proxies API calls to a locally running `feqtee serve`
const API = "http://127.0.0.1:8787";

export default defineConfig({
  server: {
    proxy: {
      "/sessions": API,
      "/records": API,
    },
  },
  build: {
    outDir: "dist",
  },
  test: {
    environment: "node",
    testTimeout: 120000,
    hookTimeout: 120000,
  },
});
