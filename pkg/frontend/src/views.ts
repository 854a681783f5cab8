/**
 * DOM views. Pure render-from-state functions; every interaction calls back
 * into the session controller, and the next render reflects the new state.
 */

import { AssignmentView, CELL_CLASSES, CellLabel } from './api.js';
import { SessionState } from './session.js';

export interface TaskHandlers {
  onSelect(itemId: string, label: CellLabel): void;
  onSubmit(): void;
}

const CLASS_HINTS: Record<CellLabel, string> = {
  circular: 'smooth round cell',
  elongated: 'sickle / crescent shape',
  other: 'any other deformation',
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = '',
  text = '',
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

export function centsToDollars(cents: number): string {
  return `$${(cents / 100).toFixed(2)}`;
}

export function renderEarningsBar(state: SessionState): HTMLElement {
  const bar = el('header', 'earnings-bar');
  bar.append(
    el('span', 'worker-id', state.workerId),
    el('span', 'earnings-pending', `pending ${centsToDollars(state.pendingCents)}`),
    el('span', 'earnings-paid', `paid ${centsToDollars(state.balanceCents)}`),
  );
  return bar;
}

/** Instruction screen: what to do, one example tile per class. */
export function renderInstructions(onStart: () => void, skippable: boolean): HTMLElement {
  const view = el('section', 'view view-instructions');
  view.append(el('h1', '', 'Classify red blood cells'));
  view.append(
    el(
      'p',
      'lead',
      'You will see cells in pairs. For each image choose the shape that fits best. ' +
        'Answers lock in when you press Submit.',
    ),
  );
  const examples = el('div', 'class-examples');
  for (const label of CELL_CLASSES) {
    const tile = el('figure', `class-example example-${label}`);
    const swatch = el('div', `swatch swatch-${label}`);
    swatch.setAttribute('role', 'img');
    swatch.setAttribute('aria-label', `${label} example`);
    tile.append(swatch, el('figcaption', '', `${label} — ${CLASS_HINTS[label]}`));
    examples.append(tile);
  }
  view.append(examples);
  const start = el('button', 'btn btn-start', skippable ? 'Continue' : 'Start labeling');
  start.addEventListener('click', onStart);
  view.append(start);
  return view;
}

function renderChoiceGroup(
  itemId: string,
  selected: CellLabel | null,
  onSelect: (item: string, label: CellLabel) => void,
): HTMLElement {
  const group = el('div', 'choice-group');
  group.dataset.item = itemId;
  group.setAttribute('role', 'radiogroup');
  for (const label of CELL_CLASSES) {
    const button = el('button', 'choice', label);
    button.dataset.label = label;
    button.setAttribute('role', 'radio');
    button.setAttribute('aria-checked', String(selected === label));
    if (selected === label) button.classList.add('selected');
    button.addEventListener('click', () => onSelect(itemId, label));
    group.append(button);
  }
  return group;
}

/** The working screen: two images side by side, one choice group each. */
export function renderTask(
  assignment: AssignmentView,
  state: SessionState,
  handlers: TaskHandlers,
): HTMLElement {
  const view = el('section', 'view view-task');
  const pair = el('div', 'pair');
  assignment.items.forEach((itemId, index) => {
    const panel = el('figure', 'cell-panel');
    panel.dataset.item = itemId;
    const url = assignment.image_urls[index];
    if (url) {
      const img = el('img', 'cell-image');
      img.src = url;
      img.alt = `cell ${itemId}`;
      panel.append(img);
    } else {
      panel.append(el('div', 'cell-image cell-image-missing', itemId));
    }
    panel.append(renderChoiceGroup(itemId, state.selections[itemId] ?? null, handlers.onSelect));
    pair.append(panel);
  });
  view.append(pair);

  const footer = el('footer', 'task-footer');
  footer.append(el('span', 'countdown', '--:--'));
  const submit = el('button', 'btn btn-submit', 'Submit');
  const ready = assignment.items.every((item) => state.selections[item] != null);
  submit.disabled = !ready || state.phase === 'submitting';
  submit.addEventListener('click', handlers.onSubmit);
  footer.append(submit);
  footer.append(
    el('span', 'reward-note', `reward ${centsToDollars(assignment.reward_cents)} per pair`),
  );
  view.append(footer);
  return view;
}

export function renderIdle(message: string, onClaim: () => void): HTMLElement {
  const view = el('section', 'view view-idle');
  view.append(el('p', 'message', message || 'Ready when you are.'));
  const claim = el('button', 'btn btn-claim', 'Get a pair');
  claim.addEventListener('click', onClaim);
  view.append(claim);
  return view;
}

export function renderNotQualified(detail: string): HTMLElement {
  const view = el('section', 'view view-not-qualified');
  view.append(el('h2', '', 'No tasks are visible to this account'));
  view.append(
    el(
      'p',
      'message',
      'Tasks here are only shown to qualified workers (masters with an approval rate above 90%). ' +
        detail,
    ),
  );
  return view;
}

export function renderSubmitted(state: SessionState, onNext: () => void): HTMLElement {
  const view = el('section', 'view view-submitted');
  view.append(el('h2', '', 'Answers recorded'));
  view.append(el('p', 'message', state.message));
  view.append(
    el('p', 'earnings-note', `Pending earnings: ${centsToDollars(state.pendingCents)}`),
  );
  const next = el('button', 'btn btn-next', 'Next pair');
  next.addEventListener('click', onNext);
  view.append(next);
  return view;
}
