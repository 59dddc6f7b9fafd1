import { mount } from "./app.js";

// Same-origin API by default; override with ?api=http://host:port when the
// service runs elsewhere (its CORS policy allows it).
document.addEventListener("DOMContentLoaded", () => {
  const apiBase = new URLSearchParams(window.location.search).get("api") ?? "";
  const root = document.getElementById("app") as HTMLDivElement;
  void mount(root, { apiBase });
});
