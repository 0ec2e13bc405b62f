// Browser entry point: same-origin API, real fetch.

import { ApiClient } from "./api.js";
import { startApp } from "./app.js";

startApp(document, new ApiClient()).catch((err) => {
  const root = document.getElementById("app");
  if (root) root.textContent = `failed to start: ${err instanceof Error ? err.message : err}`;
});
