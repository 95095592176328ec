import { App } from "./app.js";

const root = document.getElementById("app");
if (root) {
  const app = new App(root);
  void app.refreshModelInfo();
}
