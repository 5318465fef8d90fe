// Typed client for the study service HTTP contract.

export type Block = 'prediction' | 'cert_examples' | 'cert_no_examples';
export type Phase = 'diagnose' | 'predict' | 'respond';

export interface RatingScale {
  min: number;
  max: number;
  forbidden: number;
  low_label: string;
  high_label: string;
}

export interface ExamplePayload {
  role: 'tp' | 'tn' | 'fp' | 'fn';
  id: string;
  ai_label: 'present' | 'absent';
  ai_prob: number;
  ground_truth: 'present' | 'absent';
  display_url: string;
  saliency_url: string;
}

export interface TrialPayload {
  schema_version: number;
  done: boolean;
  trial_id?: string;
  block?: Block;
  trial_index?: number;
  phase?: Phase;
  rating_scale?: RatingScale;
  target?: { id: string; display_url: string; saliency_url?: string };
  examples?: ExamplePayload[];
  diagnosis?: number | null;
  ai?: { label: 'present' | 'absent'; prob: number };
  justification_options?: string[];
}

export interface ResponseBody {
  trial_id: string;
  phase: Phase;
  rating?: number;
  certify?: boolean;
  agree?: boolean;
  justifications?: string[];
  free_text?: string;
  timestamps?: Record<string, number>;
}

export interface Ack {
  ok: boolean;
  done: boolean;
  feedback?: { correct: boolean; ai_label: string; ai_prob: number };
}

export class StudyApi {
  constructor(private readonly base: string = '') {}

  async createSession(seed?: number): Promise<{ session_id: string; seed: number; n_trials: number }> {
    return this.post('/sessions', seed === undefined ? {} : { seed });
  }

  async currentTrial(sessionId: string): Promise<TrialPayload> {
    const resp = await fetch(`${this.base}/sessions/${sessionId}/trial`);
    if (!resp.ok) throw new Error(`trial fetch failed: ${resp.status}`);
    return resp.json();
  }

  async submitResponse(sessionId: string, body: ResponseBody): Promise<Ack> {
    return this.post(`/sessions/${sessionId}/response`, body);
  }

  private async post(path: string, body: unknown): Promise<any> {
    // Transient network failures retry with backoff so a submission is
    // never silently dropped.
    let lastError: unknown;
    for (let attempt = 0; attempt < 3; attempt++) {
      try {
        const resp = await fetch(`${this.base}${path}`, {
          method: 'POST',
          headers: { 'Content-Type': 'application/json' },
          body: JSON.stringify(body),
        });
        if (resp.status >= 500) throw new Error(`server error ${resp.status}`);
        const doc = await resp.json();
        if (!resp.ok) {
          throw new ApiError(doc.error ?? `request failed: ${resp.status}`, resp.status);
        }
        return doc;
      } catch (err) {
        if (err instanceof ApiError) throw err;
        lastError = err;
        await new Promise((r) => setTimeout(r, 250 * (attempt + 1)));
      }
    }
    throw lastError;
  }
}

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}
