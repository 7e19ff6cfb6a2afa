/** Browser entry point: mount the console on #app and start polling. */

import { PoolwiseConsole } from "./console.js";

document.addEventListener("DOMContentLoaded", () => {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app mount point");
  const app = new PoolwiseConsole(root);
  app.mount();
  app.startPolling();
});
