import { ApiClient } from "./api.js";
import { mount } from "./render.js";
import { ReviewConsole } from "./state.js";
const api = new ApiClient("");
const console_ = new ReviewConsole(api);
const root = document.getElementById("app");
if (!root)
    throw new Error("missing #app mount point");
mount(console_, root);
void console_.refresh();
