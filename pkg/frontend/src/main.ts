import { ApiClient } from "./api.js";
import { DomView } from "./dom.js";
import { SurveySession } from "./session.js";

// Entry point: base URL and participant id come from query parameters,
// e.g. index.html?participant=p123&base=http://localhost:8008

const params = new URLSearchParams(window.location.search);
const participant = params.get("participant") ?? `anon-${Date.now()}`;
const baseUrl = params.get("base") ?? "";

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app container");
}
const view = new DomView(root);
const session = new SurveySession(new ApiClient(baseUrl), view, participant);
view.bind(session);
void session.start();
