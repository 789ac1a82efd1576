/**
 * Typed client for the service's HTTP API.
 *
 * Every call that needs authentication takes the session token as an
 * argument and sends it in the Authorization header only.  Tokens never
 * appear in URLs, so they cannot leak through history or server logs.
 */

export type Right = "view" | "download" | "delete";
export type RoleName = "normal" | "administrator";

export interface Session {
  token: string;
  uid: string;
  role: RoleName;
}

export interface FileEntry {
  file_id: number;
  name: string;
  owner_uid: string;
  size_bytes: number;
  uploaded_at: string;
  rights: Right[];
}

export interface AclGrant {
  group_id: number;
  rights: Right[];
}

export interface UserEntry {
  uid: string;
  role: RoleName;
  has_certificate: boolean;
}

export interface GroupEntry {
  group_id: number;
  name: string;
  members: string[];
}

export interface BindResult {
  uid: string;
  created: boolean;
}

export interface FileDownload {
  name: string;
  blob: Blob;
}

/** An HTTP-level rejection, carrying the status code. */
export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

export interface Api {
  login(username: string, password: string): Promise<Session>;
  logout(token: string): Promise<void>;
  listFiles(token: string): Promise<FileEntry[]>;
  downloadFile(token: string, fileId: number): Promise<FileDownload>;
  uploadFile(token: string, file: File): Promise<FileEntry>;
  deleteFile(token: string, fileId: number): Promise<void>;
  readAcl(token: string, fileId: number): Promise<AclGrant[]>;
  writeAcl(token: string, fileId: number, grants: AclGrant[]): Promise<void>;
  listUsers(token: string): Promise<UserEntry[]>;
  addUser(token: string, uid: string, password: string, role: RoleName): Promise<UserEntry>;
  modifyUser(token: string, uid: string, changes: { password?: string; role?: RoleName }): Promise<void>;
  deleteUser(token: string, uid: string): Promise<void>;
  listGroups(token: string): Promise<GroupEntry[]>;
  createGroup(token: string, name: string): Promise<GroupEntry>;
  deleteGroup(token: string, groupId: number): Promise<void>;
  addMember(token: string, groupId: number, uid: string): Promise<void>;
  removeMember(token: string, groupId: number, uid: string): Promise<void>;
  bindCertificate(token: string, certificate: File): Promise<BindResult>;
  unbindCertificate(token: string, uid: string): Promise<void>;
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") {
      return body.detail;
    }
  } catch {
    // non-JSON body, fall through
  }
  return response.statusText || `HTTP ${response.status}`;
}

function dispositionFilename(header: string | null, fallback: string): string {
  if (header !== null) {
    const match = /filename="([^"]*)"/.exec(header);
    if (match !== null && match[1] !== "") {
      return match[1];
    }
  }
  return fallback;
}

export class HttpApi implements Api {
  private readonly fetchImpl: FetchLike;

  constructor(fetchImpl?: FetchLike) {
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async request(
    method: string,
    path: string,
    token: string | null,
    body?: BodyInit,
    contentType?: string,
  ): Promise<Response> {
    const headers: Record<string, string> = {};
    if (token !== null) {
      headers["Authorization"] = `Bearer ${token}`;
    }
    if (contentType !== undefined) {
      headers["Content-Type"] = contentType;
    }
    const response = await this.fetchImpl(path, { method, headers, body });
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return response;
  }

  private async json<T>(
    method: string,
    path: string,
    token: string | null,
    payload?: unknown,
  ): Promise<T> {
    const body = payload === undefined ? undefined : JSON.stringify(payload);
    const contentType = payload === undefined ? undefined : "application/json";
    const response = await this.request(method, path, token, body, contentType);
    return (await response.json()) as T;
  }

  async login(username: string, password: string): Promise<Session> {
    const form = new URLSearchParams({ username, password });
    const response = await this.request(
      "POST", "/sfs/api/login", null, form.toString(),
      "application/x-www-form-urlencoded",
    );
    return (await response.json()) as Session;
  }

  async logout(token: string): Promise<void> {
    await this.request("POST", "/sfs/api/logout", token);
  }

  async listFiles(token: string): Promise<FileEntry[]> {
    const body = await this.json<{ files: FileEntry[] }>("GET", "/sfs/api/files", token);
    return body.files;
  }

  async downloadFile(token: string, fileId: number): Promise<FileDownload> {
    const response = await this.request("GET", `/sfs/api/files/${fileId}`, token);
    const name = dispositionFilename(
      response.headers.get("content-disposition"), `file-${fileId}`,
    );
    return { name, blob: await response.blob() };
  }

  async uploadFile(token: string, file: File): Promise<FileEntry> {
    const form = new FormData();
    form.append("file", file);
    const response = await this.request("POST", "/sfs/api/files", token, form);
    return (await response.json()) as FileEntry;
  }

  async deleteFile(token: string, fileId: number): Promise<void> {
    await this.request("DELETE", `/sfs/api/files/${fileId}`, token);
  }

  async readAcl(token: string, fileId: number): Promise<AclGrant[]> {
    const body = await this.json<{ grants: AclGrant[] }>(
      "GET", `/sfs/api/files/${fileId}/acl`, token,
    );
    return body.grants;
  }

  async writeAcl(token: string, fileId: number, grants: AclGrant[]): Promise<void> {
    await this.json("PUT", `/sfs/api/files/${fileId}/acl`, token, { grants });
  }

  async listUsers(token: string): Promise<UserEntry[]> {
    const body = await this.json<{ users: UserEntry[] }>("GET", "/sfs/api/admin/users", token);
    return body.users;
  }

  async addUser(
    token: string, uid: string, password: string, role: RoleName,
  ): Promise<UserEntry> {
    return this.json<UserEntry>("POST", "/sfs/api/admin/users", token, { uid, password, role });
  }

  async modifyUser(
    token: string, uid: string, changes: { password?: string; role?: RoleName },
  ): Promise<void> {
    await this.json("PUT", `/sfs/api/admin/users/${encodeURIComponent(uid)}`, token, changes);
  }

  async deleteUser(token: string, uid: string): Promise<void> {
    await this.request("DELETE", `/sfs/api/admin/users/${encodeURIComponent(uid)}`, token);
  }

  async listGroups(token: string): Promise<GroupEntry[]> {
    const body = await this.json<{ groups: GroupEntry[] }>(
      "GET", "/sfs/api/admin/groups", token,
    );
    return body.groups;
  }

  async createGroup(token: string, name: string): Promise<GroupEntry> {
    return this.json<GroupEntry>("POST", "/sfs/api/admin/groups", token, { name });
  }

  async deleteGroup(token: string, groupId: number): Promise<void> {
    await this.request("DELETE", `/sfs/api/admin/groups/${groupId}`, token);
  }

  async addMember(token: string, groupId: number, uid: string): Promise<void> {
    await this.json("PUT", `/sfs/api/admin/groups/${groupId}/members`, token, { uid });
  }

  async removeMember(token: string, groupId: number, uid: string): Promise<void> {
    await this.request(
      "DELETE",
      `/sfs/api/admin/groups/${groupId}/members/${encodeURIComponent(uid)}`,
      token,
    );
  }

  async bindCertificate(token: string, certificate: File): Promise<BindResult> {
    const form = new FormData();
    form.append("certificate", certificate);
    const response = await this.request("POST", "/sfs/api/admin/certificates", token, form);
    return (await response.json()) as BindResult;
  }

  async unbindCertificate(token: string, uid: string): Promise<void> {
    await this.request(
      "DELETE", `/sfs/api/admin/certificates/${encodeURIComponent(uid)}`, token,
    );
  }
}
