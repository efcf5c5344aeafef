import "./styles.css";
import { App } from "./app";

const mount = document.getElementById("app");
if (mount) {
  const app = new App(mount);
  window.addEventListener("hashchange", () => {
    void app.start();
  });
  void app.start();
}
