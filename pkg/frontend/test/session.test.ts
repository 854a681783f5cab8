import { describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { SessionController } from '../src/session.js';

type Route = (init: RequestInit | undefined) => { status: number; body?: unknown };

/** ApiClient backed by an in-memory route table instead of a network. */
function fakeApi(routes: Record<string, Route>): ApiClient {
  const fetchFn = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const key = Object.keys(routes).find((k) => url.includes(k));
    if (!key) return new Response('{"error":"HttpError","detail":"no route"}', { status: 500 });
    const { status, body } = routes[key]!(init);
    // 204 is a null-body status; Response() rejects any body for it
    return new Response(body === undefined ? null : JSON.stringify(body), { status });
  }) as typeof fetch;
  return new ApiClient('http://fake', fetchFn, 1);
}

const ASSIGNMENT = {
  assignment_id: 'a000000',
  task_id: 't0',
  items: ['i0', 'i1'],
  image_urls: [null, null],
  claimed_at: '2026-01-05T00:00:00Z',
  deadline: '2026-01-05T01:00:00Z',
  reward_cents: 1,
};

const RECEIPT = {
  assignment_id: 'a000000',
  task_id: 't0',
  worker_id: 'w1',
  submitted_at: '2026-01-05T00:10:00Z',
  task_complete: false,
  idempotent: false,
  pending_cents: 1,
  balance_cents: 0,
};

describe('SessionController', () => {
  it('walks instructions -> labeling -> submitted and updates earnings', async () => {
    const api = fakeApi({
      '/assignments/next': () => ({ status: 200, body: ASSIGNMENT }),
      '/submit': () => ({ status: 200, body: RECEIPT }),
    });
    const session = new SessionController(api, 'w1');
    expect(session.getState().phase).toBe('instructions');

    session.acknowledgeInstructions();
    expect(session.getState().phase).toBe('idle');

    await session.claim();
    expect(session.getState().phase).toBe('labeling');
    expect(session.getState().selections).toEqual({ i0: null, i1: null });

    // submit is gated until every item has a selection
    expect(session.canSubmit()).toBe(false);
    await session.submit();
    expect(session.getState().phase).toBe('labeling');

    session.select('i0', 'circular');
    expect(session.canSubmit()).toBe(false);
    expect(session.focusedItem()).toBe('i1');
    session.select('i1', 'elongated');
    expect(session.canSubmit()).toBe(true);

    await session.submit();
    const state = session.getState();
    expect(state.phase).toBe('submitted');
    expect(state.pendingCents).toBe(1);
    expect(state.lastReceipt?.task_complete).toBe(false);
  });

  it('rejects labels outside the alphabet and unknown items', async () => {
    const api = fakeApi({ '/assignments/next': () => ({ status: 200, body: ASSIGNMENT }) });
    const session = new SessionController(api, 'w1', true);
    await session.claim();
    session.select('i0', 'square' as never);
    session.select('ghost', 'circular');
    expect(session.getState().selections).toEqual({ i0: null, i1: null });
  });

  it('surfaces the hidden-tasks screen for unqualified workers', async () => {
    const api = fakeApi({
      '/assignments/next': () => ({
        status: 403,
        body: { error: 'NotQualified', detail: 'approval rate 0.85 not above 0.90' },
      }),
    });
    const session = new SessionController(api, 'low', true);
    await session.claim();
    expect(session.getState().phase).toBe('not_qualified');
    expect(session.getState().message).toContain('0.85');
  });

  it('shows the idle screen when no tasks are available', async () => {
    const api = fakeApi({ '/assignments/next': () => ({ status: 204 }) });
    const session = new SessionController(api, 'w1', true);
    await session.claim();
    expect(session.getState().phase).toBe('idle');
    expect(session.getState().message).toContain('No tasks');
  });

  it('discards selections when the deadline expires locally', async () => {
    const api = fakeApi({ '/assignments/next': () => ({ status: 200, body: ASSIGNMENT }) });
    const session = new SessionController(api, 'w1', true);
    await session.claim();
    session.select('i0', 'other');
    session.deadlineExpired();
    const state = session.getState();
    expect(state.phase).toBe('idle');
    expect(state.assignment).toBeNull();
    expect(state.selections).toEqual({});
    expect(state.message).toContain('discarded');
  });

  it('handles a server-side deadline race as a released task', async () => {
    const api = fakeApi({
      '/assignments/next': () => ({ status: 200, body: ASSIGNMENT }),
      '/submit': () => ({
        status: 410,
        body: { error: 'DeadlineExceeded', detail: 'too late' },
      }),
    });
    const session = new SessionController(api, 'w1', true);
    await session.claim();
    session.select('i0', 'circular');
    session.select('i1', 'circular');
    await session.submit();
    expect(session.getState().phase).toBe('idle');
    expect(session.getState().message).toContain('released');
  });

  it('retries transient network failures on submit', async () => {
    let failures = 1;
    const api = fakeApi({
      '/assignments/next': () => ({ status: 200, body: ASSIGNMENT }),
      '/submit': () => {
        if (failures > 0) {
          failures -= 1;
          throw new TypeError('network dropped');
        }
        return { status: 200, body: RECEIPT };
      },
    });
    const session = new SessionController(api, 'w1', true);
    await session.claim();
    session.select('i0', 'circular');
    session.select('i1', 'other');
    await session.submit();
    expect(session.getState().phase).toBe('submitted');
  });
});
