/**
 * Labeler entry point: binds the session controller to the page, keeps the
 * countdown in sync with the server deadline, and wires keyboard shortcuts
 * (1/2/3 select the class for the first unanswered image).
 */

import { ApiClient, CELL_CLASSES } from './api.js';
import { CountdownHandle, startCountdown } from './countdown.js';
import { SessionController } from './session.js';
import {
  renderEarningsBar,
  renderIdle,
  renderInstructions,
  renderNotQualified,
  renderSubmitted,
  renderTask,
} from './views.js';

export function mountApp(root: HTMLElement, api: ApiClient, workerId: string): SessionController {
  const seen = localStorage.getItem('cellcrowd-instructions-seen') === '1';
  const controller = new SessionController(api, workerId, seen);
  let countdown: CountdownHandle | null = null;

  const render = () => {
    const state = controller.getState();
    root.replaceChildren();
    root.append(renderEarningsBar(state));

    if (countdown) {
      countdown.stop();
      countdown = null;
    }

    switch (state.phase) {
      case 'instructions':
        root.append(
          renderInstructions(() => {
            localStorage.setItem('cellcrowd-instructions-seen', '1');
            controller.acknowledgeInstructions();
            void controller.claim();
          }, seen),
        );
        break;
      case 'idle':
        root.append(renderIdle(state.message, () => void controller.claim()));
        break;
      case 'labeling':
      case 'submitting': {
        const assignment = state.assignment!;
        root.append(
          renderTask(assignment, state, {
            onSelect: (item, label) => controller.select(item, label),
            onSubmit: () => void controller.submit(),
          }),
        );
        const display = root.querySelector('.countdown');
        countdown = startCountdown(
          assignment.deadline,
          (text) => {
            if (display) display.textContent = text;
          },
          () => controller.deadlineExpired(),
        );
        break;
      }
      case 'submitted':
        root.append(renderSubmitted(state, () => void controller.claim()));
        break;
      case 'not_qualified':
        root.append(renderNotQualified(state.message));
        break;
    }
  };

  controller.onChange(render);
  render();

  document.addEventListener('keydown', (event) => {
    const index = Number(event.key) - 1;
    const label = CELL_CLASSES[index];
    if (label === undefined) return;
    const item = controller.focusedItem();
    if (item) controller.select(item, label);
  });

  return controller;
}

function bootstrap(): void {
  const root = document.getElementById('app');
  if (!root) return;
  const params = new URLSearchParams(window.location.search);
  const workerId =
    params.get('worker') ?? localStorage.getItem('cellcrowd-worker') ?? `anon-${Date.now()}`;
  localStorage.setItem('cellcrowd-worker', workerId);
  const api = new ApiClient('');
  void api
    .registerWorker({ workerId, isMaster: true })
    .catch(() => undefined) // already registered is fine
    .then(() => mountApp(root, api, workerId));
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  bootstrap();
}
