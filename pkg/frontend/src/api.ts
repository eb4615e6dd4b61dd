// Typed client for the annotation service JSON API.

export type Spans = Record<string, [number, number]>;

export type NextResponse = {
  exhausted: boolean;
  candidate_id?: string;
  sentence_id?: string;
  text?: string;
  verb?: string;
  dobj?: string;
  prep?: string;
  pobj?: string;
  spans?: Spans;
  quota?: { verb: string; positive: number; negative: number; cap: number };
  progress?: Progress;
};

export type VerbRow = {
  verb: string;
  positive: number;
  negative: number;
  cap: number;
  closed: boolean;
  prepositions: { positive: string[]; negative: string[] };
};

export type Progress = {
  candidates: number;
  labeled: number;
  positives: number;
  negatives: number;
  verbs: VerbRow[];
};

export type CostView = {
  labeled: number;
  positives: number;
  c_hr: string;
  precision: string | null;
  projected_cost_per_tp: string | null;
};

export type Conflict = {
  quad: string[];
  positive_ids: string[];
  negative_ids: string[];
};

export type LabelRecord = {
  record: {
    candidate_id: string;
    label: boolean;
    annotator: string;
    seq: number;
  };
};

// Keyboard and button submissions must produce byte-identical POST bodies,
// so both paths funnel through this single serializer.
export function buildLabelBody(
  candidateId: string,
  label: boolean,
  annotator: string,
): string {
  return JSON.stringify({
    candidate_id: candidateId,
    label: label,
    annotator: annotator,
  });
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private async getJson<T>(path: string): Promise<T> {
    const res = await fetch(this.baseUrl + path, {
      headers: { Accept: "application/json" },
    });
    if (!res.ok) {
      throw new Error(`GET ${path}: HTTP ${res.status}`);
    }
    return (await res.json()) as T;
  }

  fetchNext(exclude: string[]): Promise<NextResponse> {
    const query = exclude.length
      ? `?exclude=${encodeURIComponent(exclude.join(","))}`
      : "";
    return this.getJson<NextResponse>(`/api/next${query}`);
  }

  async postLabel(
    candidateId: string,
    label: boolean,
    annotator: string,
  ): Promise<LabelRecord> {
    const res = await fetch(this.baseUrl + "/api/label", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: buildLabelBody(candidateId, label, annotator),
    });
    if (!res.ok) {
      throw new Error(`POST /api/label: HTTP ${res.status}`);
    }
    return (await res.json()) as LabelRecord;
  }

  fetchProgress(): Promise<Progress> {
    return this.getJson<Progress>("/api/progress");
  }

  fetchCost(): Promise<CostView> {
    return this.getJson<CostView>("/api/cost");
  }

  async fetchConflicts(): Promise<Conflict[]> {
    const body = await this.getJson<{ conflicts: Conflict[] }>("/api/conflicts");
    return body.conflicts;
  }
}
