import { ApiClient, ApiError } from "./api.js";
import type { ChatTurn, QueryResponse, RoleProfile } from "./types.js";

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

export interface ChatState {
  turns: ChatTurn[];
  role: RoleProfile;
  busy: boolean;
  error: string | null;
}

export interface ChatApp {
  /** Submit a question; queued if a request is already in flight. */
  submit(text: string): Promise<void>;
  setRole(role: RoleProfile): void;
  getState(): Readonly<ChatState>;
  /** Resolves once the submission queue has drained. */
  idle(): Promise<void>;
}

// ---------------------------------------------------------------------------
// App
// ---------------------------------------------------------------------------

export function createChatApp(root: HTMLElement, client: ApiClient): ChatApp {
  const state: ChatState = { turns: [], role: "none", busy: false, error: null };
  const queue: string[] = [];
  let draining: Promise<void> = Promise.resolve();

  const dom = buildSkeleton(root);

  dom.roleSelect.addEventListener("change", () => {
    setRole(dom.roleSelect.value as RoleProfile);
  });
  dom.input.addEventListener("input", syncSendButton);
  dom.form.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = dom.input.value.trim();
    if (!text) return;
    dom.input.value = "";
    syncSendButton();
    void submit(text);
  });

  function setRole(role: RoleProfile): void {
    state.role = role;
    dom.roleSelect.value = role;
  }

  function syncSendButton(): void {
    dom.sendButton.disabled = dom.input.value.trim() === "";
  }

  function submit(text: string): Promise<void> {
    queue.push(text);
    draining = draining.then(processQueue);
    return draining;
  }

  async function processQueue(): Promise<void> {
    const text = queue.shift();
    if (text === undefined) return;
    const role = state.role;
    state.busy = true;
    state.error = null;
    render();
    try {
      const response = await client.postQuery(text, role);
      state.turns.push({ question: text, response, timestamp: Date.now(), role });
    } catch (error) {
      state.error =
        error instanceof ApiError
          ? `Request failed (${error.status}): ${error.message}`
          : `Service unreachable: ${String(error)}`;
    } finally {
      state.busy = false;
      render();
    }
  }

  async function openNode(nodeId: string): Promise<void> {
    let text: string;
    try {
      text = await client.getNode(nodeId);
    } catch (error) {
      text = error instanceof ApiError ? error.message : String(error);
    }
    dom.nodeTitle.textContent = nodeId;
    dom.nodeBody.textContent = text;
    dom.nodeModal.classList.remove("hidden");
  }

  // -------------------------------------------------------------------------
  // Rendering: the chat pane is redrawn from (turns, role, busy, error) so
  // the view is a pure function of the recorded payloads.
  // -------------------------------------------------------------------------

  function render(): void {
    dom.chatPane.replaceChildren(
      ...state.turns.map((turn) => renderTurn(turn, openNode)),
    );
    if (state.busy) {
      const pending = el("div", "pending", "Consulting the knowledge graph...");
      dom.chatPane.append(pending);
    }
    dom.errorBanner.textContent = state.error ?? "";
    dom.errorBanner.classList.toggle("hidden", state.error === null);
    dom.chatPane.scrollTop = dom.chatPane.scrollHeight;
  }

  render();
  syncSendButton();

  return {
    submit,
    setRole,
    getState: () => state,
    idle: () => draining,
  };
}

function renderTurn(
  turn: ChatTurn,
  onNodeClick: (id: string) => void,
): HTMLElement {
  const container = el("section", "turn");
  container.append(el("div", "bubble question", turn.question));

  const answer = el("div", "bubble answer");
  answer.append(renderAnswerText(turn.response.answer));
  if (turn.response.cited_node_ids.length > 0) {
    const chips = el("div", "cited-nodes");
    for (const nodeId of turn.response.cited_node_ids) {
      const chip = el("button", "node-chip", nodeId) as HTMLButtonElement;
      chip.type = "button";
      chip.addEventListener("click", () => onNodeClick(nodeId));
      chips.append(chip);
    }
    answer.append(chips);
  }
  answer.append(renderTracePanel(turn.response, turn.role));
  container.append(answer);
  return container;
}

function renderAnswerText(answer: string): HTMLElement {
  // Summary first: the opening paragraph leads, the rest stays secondary.
  const wrapper = el("div", "answer-text");
  const paragraphs = answer.split(/\n{2,}/);
  paragraphs.forEach((paragraph, index) => {
    wrapper.append(el("p", index === 0 ? "lead" : "detail", paragraph));
  });
  return wrapper;
}

function renderTracePanel(
  response: QueryResponse,
  role: RoleProfile,
): HTMLElement {
  const details = document.createElement("details");
  details.className = "trace-panel";
  details.open = role === "developer";
  const summary = document.createElement("summary");
  summary.textContent = `Trace (${response.iterations} iterations, ${response.stop_reason})`;
  details.append(summary);

  const list = el("ol", "trace-steps");
  list.setAttribute("start", "0");
  for (const step of response.trace) {
    const item = el("li", "trace-step");
    item.append(
      el("span", "trace-label", `iteration ${step.iteration}`),
      el("span", "trace-requested", ` requested: ${step.requested_ids.join(", ") || "(none)"}`),
      el("span", "trace-resolved", ` resolved: ${step.resolved_ids.join(", ") || "(none)"}`),
    );
    list.append(item);
  }
  details.append(list);
  return details;
}

// ---------------------------------------------------------------------------
// Skeleton
// ---------------------------------------------------------------------------

interface Dom {
  chatPane: HTMLElement;
  errorBanner: HTMLElement;
  form: HTMLFormElement;
  input: HTMLTextAreaElement;
  sendButton: HTMLButtonElement;
  roleSelect: HTMLSelectElement;
  nodeModal: HTMLElement;
  nodeTitle: HTMLElement;
  nodeBody: HTMLElement;
}

function buildSkeleton(root: HTMLElement): Dom {
  root.replaceChildren();

  const header = el("header", "app-header");
  header.append(el("h1", "", "Knowledge graph assistant"));
  const roleWrapper = el("label", "role-toggle", "Role ");
  const roleSelect = document.createElement("select");
  roleSelect.id = "role-select";
  for (const role of ["none", "worker", "developer"]) {
    const option = document.createElement("option");
    option.value = role;
    option.textContent = role;
    roleSelect.append(option);
  }
  roleWrapper.append(roleSelect);
  header.append(roleWrapper);

  const errorBanner = el("div", "error-banner hidden");
  errorBanner.id = "error-banner";

  const chatPane = el("main", "chat-pane");
  chatPane.id = "chat-pane";

  const form = document.createElement("form");
  form.id = "chat-form";
  const input = document.createElement("textarea");
  input.id = "chat-input";
  input.rows = 2;
  input.placeholder = "Ask about models, datasets and tasks...";
  const sendButton = document.createElement("button");
  sendButton.id = "send-btn";
  sendButton.type = "submit";
  sendButton.textContent = "Ask";
  sendButton.disabled = true;
  form.append(input, sendButton);

  const nodeModal = el("div", "node-modal hidden");
  nodeModal.id = "node-modal";
  const modalCard = el("div", "node-card");
  const nodeTitle = el("h2", "node-title");
  const nodeBody = el("pre", "node-body");
  const closeButton = document.createElement("button");
  closeButton.type = "button";
  closeButton.className = "node-close";
  closeButton.textContent = "Close";
  closeButton.addEventListener("click", () => nodeModal.classList.add("hidden"));
  modalCard.append(nodeTitle, nodeBody, closeButton);
  nodeModal.append(modalCard);

  root.append(header, errorBanner, chatPane, form, nodeModal);
  return {
    chatPane,
    errorBanner,
    form,
    input,
    sendButton,
    roleSelect,
    nodeModal,
    nodeTitle,
    nodeBody,
  };
}

function el(tag: string, className = "", text = ""): HTMLElement {
  const element = document.createElement(tag);
  if (className) element.className = className;
  if (text) element.textContent = text;
  return element;
}
