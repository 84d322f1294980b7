/** Minimal DOM renderer for the six panes. All interaction goes through the
 * command handlers; nothing here touches state directly (the reducer owns
 * it), so a re-render after each server event is the whole UI loop.
 */

import type { ViewModels } from "./viewmodels.js";

export interface Commands {
  generate(): void;
  pause(): void;
  generateForSelection(start: number, end: number): void;
  hoverBlock(nodeId: string | null): void;
  focusNode(nodeId: string | null): void;
  assemble(nodeId: string): void;
  toggleGroupPick(nodeId: string): void;
  groupPicked(): void;
  split(nodeId: string): void;
  trim(nodeId: string): void;
  setCursor(nodeId: string): void;
  extend(choiceId: string): void;
  refine(spec: { style?: string; detail?: string; custom_prompt?: string }): void;
  adopt(alternativeId: string): void;
  brush(start: number, end: number): void;
  clearBrush(): void;
}

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export interface RenderFlags {
  running: boolean;
  paused: boolean;
  lastError: string | null;
  groupPicks: Set<string>;
}

export function render(
  root: HTMLElement,
  vms: ViewModels,
  flags: RenderFlags,
  commands: Commands,
): void {
  root.textContent = "";
  root.append(
    renderToolbar(flags, commands),
    renderCode(vms, commands),
    renderChain(vms, commands),
    renderTutorial(vms, commands),
    renderOutline(vms, flags, commands),
    renderBranches(vms, commands),
    renderNodeSpace(vms, commands),
  );
}

function renderToolbar(flags: RenderFlags, commands: Commands): HTMLElement {
  const bar = el("header", "toolbar");
  const generate = el("button", "generate", "Generate") as HTMLButtonElement;
  generate.disabled = flags.running;
  generate.onclick = () => commands.generate();
  const pause = el("button", "pause", "Pause") as HTMLButtonElement;
  pause.disabled = !flags.running;
  pause.onclick = () => commands.pause();
  bar.append(generate, pause);
  if (flags.paused) {
    bar.append(el("span", "badge paused", "Paused"));
  }
  if (flags.running) {
    bar.append(el("span", "badge running", "Generating"));
  }
  if (flags.lastError) {
    bar.append(el("span", "toast error", flags.lastError));
  }
  return bar;
}

function renderCode(vms: ViewModels, commands: Commands): HTMLElement {
  const pane = el("section", "pane code-view");
  pane.append(el("h2", undefined, `Code (${vms.code.language})`));
  const list = el("ol", "code-lines");
  let dragStart: number | null = null;
  for (const line of vms.code.lines) {
    const item = el("li", "code-line", line.text);
    item.dataset.line = String(line.number);
    if (line.highlighted) {
      item.classList.add("highlighted");
    }
    if (line.brushed) {
      item.classList.add("brushed");
    }
    item.onmousedown = () => {
      dragStart = line.number;
      commands.brush(line.number, line.number);
    };
    item.onmouseenter = (event) => {
      if (dragStart !== null && (event as MouseEvent).buttons === 1) {
        commands.brush(Math.min(dragStart, line.number), Math.max(dragStart, line.number));
      }
    };
    item.onmouseup = () => {
      dragStart = null;
    };
    list.append(item);
  }
  pane.append(list);
  if (vms.code.hasSelection) {
    const brushedLines = vms.code.lines.filter((line) => line.brushed);
    const start = brushedLines[0]?.number ?? 1;
    const end = brushedLines[brushedLines.length - 1]?.number ?? start;
    const button = el("button", "floating generate-selection", `Generate for lines ${start}-${end}`);
    button.onclick = () => commands.generateForSelection(start, end);
    const clear = el("button", "floating clear-selection", "Clear");
    clear.onclick = () => commands.clearBrush();
    pane.append(button, clear);
  }
  return pane;
}

function renderTutorial(vms: ViewModels, commands: Commands): HTMLElement {
  const pane = el("section", "pane tutorial-view");
  pane.append(el("h2", undefined, "Tutorial"));
  for (const block of vms.tutorial) {
    const card = el("article", "block");
    if (block.focused) {
      card.classList.add("focused");
    }
    if (block.hovered) {
      card.classList.add("hovered");
    }
    card.onmouseenter = () => commands.hoverBlock(block.nodeId);
    card.onmouseleave = () => commands.hoverBlock(null);
    card.onclick = () => commands.focusNode(block.nodeId);
    card.append(el("h3", "brief", block.brief));
    if (block.anchor) {
      card.append(el("span", "anchor-tag", `lines ${block.anchor.start}-${block.anchor.end}`));
    }
    card.append(el("p", "paragraph", block.paragraph));
    pane.append(card);
  }
  return pane;
}

function renderChain(vms: ViewModels, commands: Commands): HTMLElement {
  const pane = el("section", "pane chain-view");
  pane.append(el("h2", undefined, "Chain"));
  for (const node of vms.chain) {
    const chip = el("div", "chain-node", node.brief);
    chip.title = node.action ?? "";
    if (node.anchored) {
      chip.classList.add("anchored");
    }
    if (node.pulsing) {
      chip.classList.add("pulsing");
    }
    chip.onmouseenter = () => commands.hoverBlock(node.nodeId);
    chip.onmouseleave = () => commands.hoverBlock(null);
    chip.onclick = () => commands.focusNode(node.nodeId);
    pane.append(chip);
  }
  return pane;
}

function renderOutline(vms: ViewModels, flags: RenderFlags, commands: Commands): HTMLElement {
  const pane = el("section", "pane outline-view");
  pane.append(el("h2", undefined, "Outline"));
  const legend = el("div", "legend");
  for (const [origin, color] of Object.entries(vms.outline.legend)) {
    const entry = el("span", "legend-entry", origin);
    const dot = el("i", "dot");
    dot.style.backgroundColor = color;
    entry.prepend(dot);
    legend.append(entry);
  }
  pane.append(legend);

  const controls = el("div", "outline-controls");
  const groupButton = el("button", "group", "Group picked") as HTMLButtonElement;
  groupButton.disabled = flags.groupPicks.size < 2;
  groupButton.onclick = () => commands.groupPicked();
  controls.append(groupButton);
  pane.append(controls);

  const tree = el("div", "outline-tree");
  for (const node of vms.outline.nodes) {
    const row = el("div", "outline-node");
    row.style.paddingLeft = `${node.depth * 14}px`;
    if (node.onActiveChain) {
      row.classList.add("on-chain");
    }
    if (node.isCursor) {
      row.classList.add("cursor");
    }
    if (node.selected) {
      row.classList.add("selected");
    }
    const pick = el("input") as HTMLInputElement;
    pick.type = "checkbox";
    pick.checked = flags.groupPicks.has(node.nodeId);
    pick.onchange = () => commands.toggleGroupPick(node.nodeId);
    const dot = el("i", "dot");
    dot.style.backgroundColor = node.color;
    dot.title = node.origin;
    const label = el("span", "label", node.brief || node.action || node.nodeId);
    label.onclick = () => {
      commands.focusNode(node.nodeId);
      commands.assemble(node.nodeId);
      commands.setCursor(node.nodeId);
    };
    const split = el("button", "split", "Split");
    split.onclick = () => commands.split(node.nodeId);
    const trim = el("button", "trim", "Trim");
    trim.onclick = () => commands.trim(node.nodeId);
    row.append(pick, dot, label, split, trim);
    tree.append(row);
  }
  pane.append(tree);
  return pane;
}

function renderBranches(vms: ViewModels, commands: Commands): HTMLElement {
  const pane = el("section", "pane branches-view");
  pane.append(el("h2", undefined, "Branches"));
  if (vms.branches.cursor) {
    pane.append(el("div", "cursor", `from ${vms.branches.cursor}`));
  }
  for (const choice of vms.branches.choices) {
    const row = el("div", "choice");
    const edge = el("span", "edge");
    edge.style.height = `${choice.edgeWidth}px`;
    const name = el("span", "action", `${choice.action} (${choice.votes})`);
    const reason = el("span", "reason", choice.reason);
    row.append(edge, name, reason);
    if (choice.label) {
      row.append(el("span", "label", choice.label));
    }
    if (choice.kind === "stub") {
      row.classList.add("stub");
    }
    row.onclick = () => commands.extend(choice.id);
    pane.append(row);
  }
  return pane;
}

function renderNodeSpace(vms: ViewModels, commands: Commands): HTMLElement {
  const pane = el("section", "pane node-space-view");
  pane.append(el("h2", undefined, vms.nodeSpace.stale ? "Node space (stale)" : "Node space"));

  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", "-1.2 -1.2 2.4 2.4");
  svg.classList.add("scatter");
  const xs = vms.nodeSpace.points.map((p) => Math.abs(p.x));
  const ys = vms.nodeSpace.points.map((p) => Math.abs(p.y));
  const scale = Math.max(1e-9, ...xs, ...ys);
  for (const point of vms.nodeSpace.points) {
    const circle = document.createElementNS("http://www.w3.org/2000/svg", "circle");
    circle.setAttribute("cx", String(point.x / scale));
    circle.setAttribute("cy", String(point.y / scale));
    circle.setAttribute("r", point.sameIntentAsFocused ? "0.09" : "0.05");
    circle.setAttribute("fill", point.color);
    if (point.sameIntentAsFocused) {
      circle.classList.add("same-intent");
    }
    circle.addEventListener("click", () => commands.adopt(point.nodeId));
    svg.append(circle);
  }
  pane.append(svg);

  const panel = el("div", "refine-panel");
  const styleSelect = el("select", "style") as HTMLSelectElement;
  styleSelect.append(new Option("(style)", ""));
  for (const style of vms.nodeSpace.styles) {
    styleSelect.append(new Option(style, style));
  }
  const shorter = el("button", "shorter", "Shorter");
  shorter.onclick = () => commands.refine({ detail: "Shorter" });
  const longer = el("button", "longer", "Longer");
  longer.onclick = () => commands.refine({ detail: "Longer" });
  const prompt = el("input", "free-prompt") as HTMLInputElement;
  prompt.placeholder = "free refinement prompt";
  const confirm = el("button", "confirm", "Confirm");
  confirm.onclick = () => {
    const spec: { style?: string; custom_prompt?: string } = {};
    if (styleSelect.value) {
      spec.style = styleSelect.value;
    }
    if (prompt.value.trim()) {
      spec.custom_prompt = prompt.value.trim();
    }
    commands.refine(spec);
  };
  panel.append(styleSelect, shorter, longer, prompt, confirm);
  pane.append(panel);
  return pane;
}
