import type { QueryRequest, QueryResponse, RoleProfile } from "./types.js";

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

/** Thin fetch wrapper around the query service endpoints. */
export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  async postQuery(question: string, role: RoleProfile): Promise<QueryResponse> {
    const body: QueryRequest = {
      question,
      role_profile: role === "none" ? null : role,
    };
    const response = await fetch(`${this.baseUrl}/api/query`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await describeError(response));
    }
    return (await response.json()) as QueryResponse;
  }

  async getNode(nodeId: string): Promise<string> {
    const response = await fetch(
      `${this.baseUrl}/api/node/${encodeURIComponent(nodeId)}`,
    );
    if (!response.ok) {
      throw new ApiError(response.status, await describeError(response));
    }
    return response.text();
  }

  async getSchema(): Promise<string> {
    const response = await fetch(`${this.baseUrl}/api/schema`);
    if (!response.ok) {
      throw new ApiError(response.status, await describeError(response));
    }
    return response.text();
  }
}

async function describeError(response: Response): Promise<string> {
  try {
    const payload = await response.json();
    if (payload && typeof payload.detail === "string") {
      return payload.detail;
    }
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return `service answered ${response.status}`;
}
