import { ServiceApi } from "./api.js";
import { bindApp, renderApp } from "./pages.js";
import { Wizard } from "./wizard.js";

const SID_KEY = "votebooth-session";

function serviceBase(): string {
  const param = new URLSearchParams(window.location.search).get("base");
  return (param ?? window.location.origin).replace(/\/$/, "");
}

const app = document.querySelector<HTMLDivElement>("#app")!;
const wizard = new Wizard(new ServiceApi(serviceBase()));

function rerender() {
  if (wizard.sessionId !== null) {
    sessionStorage.setItem(SID_KEY, wizard.sessionId);
  }
  app.innerHTML = renderApp(wizard);
  bindApp(wizard, rerender);
}

const stored = sessionStorage.getItem(SID_KEY);
if (stored !== null) {
  wizard.resume(stored).then(rerender, () => {
    // stale or expired session: start over on a clean slate
    sessionStorage.removeItem(SID_KEY);
    rerender();
  });
} else {
  rerender();
}
