/**
 * Typed client for the orchestrator HTTP API.
 *
 * The server is the source of truth for all state; this client only shapes
 * requests and responses. Submissions carry an idempotency key and retry on
 * transient network failure, which is safe because the server returns the
 * original receipt for a repeated identical submission.
 */

export const CELL_CLASSES = ['circular', 'elongated', 'other'] as const;
export type CellLabel = (typeof CELL_CLASSES)[number];

export interface WorkerSnapshot {
  worker_id: string;
  is_master: boolean;
  approval_rate: number;
  submitted_count: number;
  approved_count: number;
  balance_cents: number;
  pending_cents: number;
}

export interface AssignmentView {
  assignment_id: string;
  task_id: string;
  items: string[];
  image_urls: (string | null)[];
  claimed_at: string;
  deadline: string;
  reward_cents: number;
}

export interface SubmitReceipt {
  assignment_id: string;
  task_id: string;
  worker_id: string;
  submitted_at: string | null;
  task_complete: boolean;
  idempotent: boolean;
  pending_cents: number;
  balance_cents: number;
}

export interface ConsensusView {
  outcome: 'label' | 'no_consensus';
  label: string | null;
  agreement: number | null;
  pattern?: number[];
  reason?: string;
  votes?: number;
}

export interface TaskStatus {
  task_id: string;
  batch_id: string;
  state: 'open' | 'complete' | 'expired';
  items: string[];
  k: number;
  votes: Record<string, number>;
  consensus: Record<string, ConsensusView | null>;
}

export interface BatchStatus {
  batch_id: string;
  n_tasks: number;
  complete: number;
  tasks: TaskStatus[];
}

export type ClaimResult =
  | { kind: 'assignment'; assignment: AssignmentView }
  | { kind: 'none' }
  | { kind: 'not_qualified'; detail: string };

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail: string,
  ) {
    super(detail);
    this.name = 'ApiError';
  }
}

interface RegisterOptions {
  workerId: string;
  isMaster?: boolean;
  approvalRate?: number;
}

export class ApiClient {
  constructor(
    private readonly baseUrl = '',
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
    private readonly retryDelayMs = 250,
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    headers?: Record<string, string>,
    retries = 0,
  ): Promise<{ status: number; body: T | null }> {
    for (let attempt = 0; ; attempt++) {
      try {
        const response = await this.fetchFn(this.baseUrl + path, {
          method,
          headers: { 'content-type': 'application/json', ...headers },
          body: body === undefined ? undefined : JSON.stringify(body),
        });
        const text = await response.text();
        const parsed = text ? (JSON.parse(text) as T) : null;
        if (!response.ok) {
          const err = parsed as { error?: string; detail?: string } | null;
          throw new ApiError(
            response.status,
            err?.error ?? 'HttpError',
            err?.detail ?? `HTTP ${response.status}`,
          );
        }
        return { status: response.status, body: parsed };
      } catch (error) {
        // ApiError means the server answered; only network-level failures retry
        if (error instanceof ApiError || attempt >= retries) throw error;
        await new Promise((resolve) => setTimeout(resolve, this.retryDelayMs));
      }
    }
  }

  async registerWorker(options: RegisterOptions): Promise<WorkerSnapshot> {
    const { body } = await this.request<WorkerSnapshot>('POST', '/workers', {
      worker_id: options.workerId,
      is_master: options.isMaster ?? true,
      approval_rate: options.approvalRate,
    });
    return body!;
  }

  async getWorker(workerId: string): Promise<WorkerSnapshot> {
    const { body } = await this.request<WorkerSnapshot>(
      'GET',
      `/workers/${encodeURIComponent(workerId)}`,
    );
    return body!;
  }

  async claimNext(workerId: string): Promise<ClaimResult> {
    try {
      const { status, body } = await this.request<AssignmentView>(
        'GET',
        `/assignments/next?worker_id=${encodeURIComponent(workerId)}`,
      );
      if (status === 204 || body === null) return { kind: 'none' };
      return { kind: 'assignment', assignment: body };
    } catch (error) {
      if (error instanceof ApiError && error.status === 403) {
        return { kind: 'not_qualified', detail: error.message };
      }
      throw error;
    }
  }

  /** Submit both labels; retries transient failures under an idempotency key. */
  async submit(
    assignmentId: string,
    answers: Record<string, CellLabel>,
    idempotencyKey: string,
  ): Promise<SubmitReceipt> {
    const { body } = await this.request<SubmitReceipt>(
      'POST',
      `/assignments/${encodeURIComponent(assignmentId)}/submit`,
      { answers },
      { 'idempotency-key': idempotencyKey },
      2,
    );
    return body!;
  }

  async taskStatus(taskId: string): Promise<TaskStatus> {
    const { body } = await this.request<TaskStatus>(
      'GET',
      `/tasks/${encodeURIComponent(taskId)}`,
    );
    return body!;
  }

  async batchStatus(batchId: string): Promise<BatchStatus> {
    const { body } = await this.request<BatchStatus>(
      'GET',
      `/batches/${encodeURIComponent(batchId)}`,
    );
    return body!;
  }

  /** Admin helper: create a batch of items (optionally with truth labels). */
  async createBatch(
    items: { item_id: string; label?: string; image?: string }[],
    options: { k?: number; batch_id?: string } = {},
  ): Promise<{ batch_id: string; task_ids: string[] }> {
    const { body } = await this.request<{ batch_id: string; task_ids: string[] }>(
      'POST',
      '/batches',
      { items, ...options },
    );
    return body!;
  }
}
