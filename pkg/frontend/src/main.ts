import { AnnotationApp } from "./ui.js";

window.addEventListener("DOMContentLoaded", () => {
  const app = new AnnotationApp();
  void app.start();
});
