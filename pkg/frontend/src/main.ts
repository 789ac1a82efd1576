import { HttpApi } from "./api.js";
import { renderInto } from "./dom.js";
import { AppStore } from "./state.js";
import { renderView } from "./views.js";

const target = document.getElementById("app");
if (target === null) {
  throw new Error("missing #app mount point");
}

const store = new AppStore(new HttpApi(), (message) => window.confirm(message));
store.subscribe((state) => renderInto(target, renderView(state), store));
renderInto(target, renderView(store.state), store);
