// Gateway /v1 response shapes, verbatim. The UI renders these fields and
// nothing else; it never computes business state on its own.

export interface WhoamiDoc {
  tenant: string;
  role: "user" | "admin" | "manager";
}

export interface QueueStateDoc {
  capacity: number;
  depth: number;
  enqueued_total: number;
  drained_total: number;
  rejected_total: number;
}

export interface DashboardDoc {
  generated_at: number;
  buses: Record<string, QueueStateDoc>;
  apps: Record<string, number>;
  requests: Record<string, number>;
  resources: Record<string, Record<string, number>>;
  cost: Record<string, number>;
  unpriced_records: number;
}

export interface RequestDoc {
  request_id: string;
  requester: string;
  kind: string;
  spec: Record<string, string>;
  labels: Record<string, string>;
  state: string;
  decided_by: string | null;
}

export interface RequestListDoc {
  requests: RequestDoc[];
}

export interface CatalogEntryDoc {
  product_code: string;
  unit_price_minor: number;
  currency: string;
  version: number;
  created_ms: number;
}

export interface CostRowDoc {
  group: string;
  currency: string;
  total_minor: number;
}

export interface CostReportDoc {
  group_by: string;
  rows: CostRowDoc[];
  generated_at: number;
}

export interface ErrorDoc {
  error: string;
  detail: string;
}
