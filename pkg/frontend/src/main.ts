import { ApiClient } from "./api.js";
import { createChatApp } from "./app.js";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
createChatApp(root, new ApiClient());
