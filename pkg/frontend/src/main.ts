/** Browser entry point. The API base defaults to same-origin; serving
 * the console from elsewhere works with ?api=http://host:port.
 */

import { ApiClient } from "./api.js";
import { App } from "./app.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "";
const root = document.getElementById("app");
if (root) {
  new App(root, new ApiClient(base)).mount();
}
