/**
 * Admin progress view: tasks in a batch, their vote counts, and the
 * consensus outcome for every item once its task completes.
 */

import { ApiClient, BatchStatus, ConsensusView } from './api.js';

function cellText(consensus: ConsensusView | null): string {
  if (!consensus) return '—';
  if (consensus.outcome === 'label') {
    return `${consensus.label} (${consensus.agreement}/5)`;
  }
  return consensus.reason === 'expired-incomplete' ? 'N/A (expired)' : 'N/A (2-2-1)';
}

export function renderBatchTable(status: BatchStatus): HTMLElement {
  const section = document.createElement('section');
  section.className = 'admin-batch';
  const heading = document.createElement('h2');
  heading.textContent = `Batch ${status.batch_id}: ${status.complete}/${status.n_tasks} tasks complete`;
  section.append(heading);

  const table = document.createElement('table');
  table.className = 'batch-table';
  const head = document.createElement('tr');
  for (const title of ['task', 'state', 'item', 'votes', 'consensus']) {
    const th = document.createElement('th');
    th.textContent = title;
    head.append(th);
  }
  table.append(head);

  for (const task of status.tasks) {
    task.items.forEach((item, index) => {
      const row = document.createElement('tr');
      row.className = `task-${task.state}`;
      row.dataset.item = item;
      const cells = [
        index === 0 ? task.task_id : '',
        index === 0 ? task.state : '',
        item,
        String(task.votes[item] ?? 0),
        cellText(task.consensus[item] ?? null),
      ];
      for (const text of cells) {
        const td = document.createElement('td');
        td.textContent = text;
        row.append(td);
      }
      table.append(row);
    });
  }
  section.append(table);
  return section;
}

export async function refreshAdmin(
  root: HTMLElement,
  api: ApiClient,
  batchId: string,
): Promise<BatchStatus> {
  const status = await api.batchStatus(batchId);
  root.replaceChildren(renderBatchTable(status));
  return status;
}

function bootstrap(): void {
  const root = document.getElementById('admin');
  if (!root) return;
  const params = new URLSearchParams(window.location.search);
  const batchId = params.get('batch') ?? 'b0000';
  const api = new ApiClient('');
  const tick = () =>
    refreshAdmin(root, api, batchId).catch((error) => {
      root.textContent = `cannot load batch ${batchId}: ${error}`;
    });
  void tick();
  setInterval(tick, 3000);
}

if (typeof document !== 'undefined' && document.getElementById('admin')) {
  bootstrap();
}
