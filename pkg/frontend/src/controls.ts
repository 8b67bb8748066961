import { CommandFrame, OPERATOR_ACTIONS, OperatorAction } from "./protocol.js";
import { ConsoleViewModel, Toast } from "./viewmodel.js";

const ACTION_LABELS: Record<OperatorAction, string> = {
  start: "Start",
  pause: "Pause / resume",
  next: "Next cue",
  reset_stop: "Reset stop",
  enter_teach: "Enter teach",
  exit_teach: "Exit teach",
  simulate_tap: "Simulate tap",
};

/** One button per wire action, built once; state flows through `disabled`. */
export function buildControls(
  root: HTMLElement,
  vm: ConsoleViewModel,
  send: (frame: CommandFrame) => void,
): void {
  for (const action of OPERATOR_ACTIONS) {
    const btn = document.createElement("button");
    btn.type = "button";
    btn.dataset.action = action;
    btn.textContent = ACTION_LABELS[action];
    btn.addEventListener("click", () => {
      const frame = vm.issueCommand(action);
      if (frame !== null) {
        send(frame);
      }
    });
    root.append(btn);
  }
}

export function renderControls(root: HTMLElement, vm: ConsoleViewModel): void {
  const enabled = vm.enabledActions();
  for (const btn of root.querySelectorAll<HTMLButtonElement>("button[data-action]")) {
    btn.disabled = !enabled.has(btn.dataset.action as OperatorAction);
  }
}

export function renderToasts(root: HTMLElement, toasts: readonly Toast[]): void {
  root.textContent = "";
  for (const toast of toasts) {
    const li = document.createElement("li");
    li.className = `toast ${toast.kind}`;
    li.textContent = toast.text;
    root.append(li);
  }
}
