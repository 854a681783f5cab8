/**
 * Labeling session state machine.
 *
 * All transitions are driven by server responses; local state never invents
 * facts (refresh-safe). Submission is possible only when every item in the
 * pair has a selection.
 */

import {
  ApiClient,
  ApiError,
  AssignmentView,
  CELL_CLASSES,
  CellLabel,
  SubmitReceipt,
} from './api.js';

export type SessionPhase =
  | 'instructions'
  | 'idle' // no assignment held; may claim
  | 'labeling'
  | 'submitting'
  | 'submitted'
  | 'not_qualified';

export interface SessionState {
  phase: SessionPhase;
  workerId: string;
  assignment: AssignmentView | null;
  selections: Record<string, CellLabel | null>;
  pendingCents: number;
  balanceCents: number;
  lastReceipt: SubmitReceipt | null;
  message: string;
}

type Listener = (state: SessionState) => void;

export class SessionController {
  private state: SessionState;
  private listeners: Listener[] = [];

  constructor(
    private readonly api: ApiClient,
    workerId: string,
    seenInstructions = false,
  ) {
    this.state = {
      phase: seenInstructions ? 'idle' : 'instructions',
      workerId,
      assignment: null,
      selections: {},
      pendingCents: 0,
      balanceCents: 0,
      lastReceipt: null,
      message: '',
    };
  }

  getState(): SessionState {
    return this.state;
  }

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  private update(patch: Partial<SessionState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  acknowledgeInstructions(): void {
    if (this.state.phase === 'instructions') {
      this.update({ phase: 'idle', message: '' });
    }
  }

  /** Ask the server for the next assignment. */
  async claim(): Promise<void> {
    if (this.state.phase !== 'idle' && this.state.phase !== 'submitted') return;
    const result = await this.api.claimNext(this.state.workerId);
    if (result.kind === 'not_qualified') {
      this.update({
        phase: 'not_qualified',
        assignment: null,
        selections: {},
        message: result.detail,
      });
      return;
    }
    if (result.kind === 'none') {
      this.update({
        phase: 'idle',
        assignment: null,
        selections: {},
        message: 'No tasks available right now.',
      });
      return;
    }
    const selections: Record<string, CellLabel | null> = {};
    for (const item of result.assignment.items) selections[item] = null;
    this.update({
      phase: 'labeling',
      assignment: result.assignment,
      selections,
      message: '',
    });
  }

  select(itemId: string, label: CellLabel): void {
    if (this.state.phase !== 'labeling' || !this.state.assignment) return;
    if (!(CELL_CLASSES as readonly string[]).includes(label)) return;
    if (!(itemId in this.state.selections)) return;
    this.update({ selections: { ...this.state.selections, [itemId]: label } });
  }

  /** First item without a selection; keyboard shortcuts target this. */
  focusedItem(): string | null {
    const assignment = this.state.assignment;
    if (!assignment) return null;
    for (const item of assignment.items) {
      if (this.state.selections[item] === null) return item;
    }
    return null;
  }

  canSubmit(): boolean {
    const { phase, assignment, selections } = this.state;
    if (phase !== 'labeling' || !assignment) return false;
    return assignment.items.every((item) => selections[item] != null);
  }

  async submit(): Promise<void> {
    if (!this.canSubmit() || !this.state.assignment) return;
    const assignment = this.state.assignment;
    const answers: Record<string, CellLabel> = {};
    for (const item of assignment.items) {
      answers[item] = this.state.selections[item] as CellLabel;
    }
    this.update({ phase: 'submitting' });
    try {
      const receipt = await this.api.submit(
        assignment.assignment_id,
        answers,
        assignment.assignment_id, // one submission per assignment
      );
      this.update({
        phase: 'submitted',
        assignment: null,
        selections: {},
        lastReceipt: receipt,
        pendingCents: receipt.pending_cents,
        balanceCents: receipt.balance_cents,
        message: receipt.task_complete
          ? 'Submitted — that task is now fully answered.'
          : 'Submitted.',
      });
    } catch (error) {
      if (error instanceof ApiError && error.status === 410) {
        // deadline race: selections are void, offer a fresh claim
        this.update({
          phase: 'idle',
          assignment: null,
          selections: {},
          message: 'The deadline passed before your answers arrived; the task was released.',
        });
        return;
      }
      this.update({ phase: 'labeling', message: describeError(error) });
    }
  }

  /** Countdown expiry: discard selections and offer to claim again. */
  deadlineExpired(): void {
    if (this.state.phase !== 'labeling' && this.state.phase !== 'submitting') return;
    this.update({
      phase: 'idle',
      assignment: null,
      selections: {},
      message: 'Time ran out for that pair; your selections were discarded.',
    });
  }

  async refreshEarnings(): Promise<void> {
    const worker = await this.api.getWorker(this.state.workerId);
    this.update({
      pendingCents: worker.pending_cents,
      balanceCents: worker.balance_cents,
    });
  }
}

function describeError(error: unknown): string {
  if (error instanceof ApiError) return `${error.code}: ${error.message}`;
  return error instanceof Error ? error.message : String(error);
}
