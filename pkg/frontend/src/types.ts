// Wire types of the kgrag query service.

export type RoleProfile = "none" | "worker" | "developer";

export interface QueryRequest {
  question: string;
  role_profile: RoleProfile | null;
}

export interface TraceRecord {
  iteration: number;
  requested_ids: string[];
  resolved_ids: string[];
}

export interface QueryResponse {
  answer: string;
  trace: TraceRecord[];
  iterations: number;
  stop_reason: string;
  cited_node_ids: string[];
}

/** One completed exchange as rendered in the chat pane. */
export interface ChatTurn {
  question: string;
  response: QueryResponse;
  timestamp: number;
  role: RoleProfile;
}
