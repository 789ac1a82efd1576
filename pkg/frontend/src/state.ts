/**
 * Application state and transitions.
 *
 * The store owns the only copy of the session token.  It lives in this
 * object for the lifetime of the page and is never written to URLs,
 * cookies, or any kind of persistent storage.
 */

import {
  Api,
  ApiError,
  FileDownload,
  FileEntry,
  GroupEntry,
  RoleName,
  Session,
  UserEntry,
} from "./api.js";

export type ViewName = "login" | "files" | "admin";

export interface AdminData {
  users: UserEntry[];
  groups: GroupEntry[];
}

export interface ViewState {
  session: Session | null;
  view: ViewName;
  files: FileEntry[];
  admin: AdminData | null;
  loginError: string | null;
  notice: string | null;
}

/** Shown for any credential rejection; deliberately does not say which
 * part of the logon was wrong. */
export const CREDENTIAL_ERROR = "logon failed";

/** Shown when the service could not be reached at all. */
export const CONNECTION_ERROR = "could not reach the service";

export const SESSION_EXPIRED = "your session has ended, log on again";

export function initialState(): ViewState {
  return {
    session: null,
    view: "login",
    files: [],
    admin: null,
    loginError: null,
    notice: null,
  };
}

type Listener = (state: ViewState) => void;
type ConfirmFn = (message: string) => boolean;

function sortedByFileId(files: FileEntry[]): FileEntry[] {
  return [...files].sort((a, b) => a.file_id - b.file_id);
}

export class AppStore {
  state: ViewState = initialState();

  private readonly api: Api;
  private readonly confirm: ConfirmFn;
  private readonly listeners: Listener[] = [];
  private epoch = 0;

  constructor(api: Api, confirm: ConfirmFn = () => true) {
    this.api = api;
    this.confirm = confirm;
  }

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  private set(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    this.emit();
  }

  /** Drop the session and return to the login view. */
  private resetToLogin(message: string | null): void {
    this.epoch += 1;
    this.state = { ...initialState(), loginError: message };
    this.emit();
  }

  /**
   * Run one authenticated call.  A 401 means the session is gone
   * (expired, or the certificate was revoked mid-session), so the UI
   * falls back to the login view.  Responses that arrive after a
   * logout are discarded.
   */
  private async guarded<T>(action: (token: string) => Promise<T>): Promise<T | null> {
    const session = this.state.session;
    if (session === null) {
      return null;
    }
    const epoch = this.epoch;
    try {
      const result = await action(session.token);
      if (epoch !== this.epoch) {
        return null;
      }
      return result;
    } catch (exc) {
      if (epoch !== this.epoch) {
        return null;
      }
      if (exc instanceof ApiError && exc.status === 401) {
        this.resetToLogin(SESSION_EXPIRED);
        return null;
      }
      if (exc instanceof ApiError) {
        this.set({ notice: exc.message });
        return null;
      }
      this.set({ notice: CONNECTION_ERROR });
      return null;
    }
  }

  async login(username: string, password: string): Promise<boolean> {
    const epoch = this.epoch;
    let session: Session;
    try {
      session = await this.api.login(username, password);
    } catch (exc) {
      if (epoch !== this.epoch) {
        return false;
      }
      const message = exc instanceof ApiError ? CREDENTIAL_ERROR : CONNECTION_ERROR;
      this.set({ loginError: message });
      return false;
    }
    if (epoch !== this.epoch) {
      return false;
    }
    this.set({ session, view: "files", loginError: null, notice: null });
    await this.refreshFiles();
    return this.state.session !== null;
  }

  async logout(): Promise<void> {
    const session = this.state.session;
    if (session !== null) {
      try {
        await this.api.logout(session.token);
      } catch {
        // the local session is discarded regardless
      }
    }
    this.resetToLogin(null);
  }

  /**
   * Switch views.  Without a session every navigation lands on the
   * login view; the admin view additionally requires the administrator
   * role and silently stays put for normal users.
   */
  navigate(view: ViewName): void {
    if (this.state.session === null) {
      this.set({ view: "login" });
      return;
    }
    if (view === "admin") {
      if (this.state.session.role !== "administrator") {
        return;
      }
      void this.openAdmin();
      return;
    }
    this.set({ view, notice: null });
  }

  async refreshFiles(): Promise<void> {
    const files = await this.guarded((token) => this.api.listFiles(token));
    if (files !== null) {
      this.set({ files: sortedByFileId(files) });
    }
  }

  async download(fileId: number): Promise<FileDownload | null> {
    return this.guarded((token) => this.api.downloadFile(token, fileId));
  }

  async upload(file: File): Promise<void> {
    const entry = await this.guarded((token) => this.api.uploadFile(token, file));
    if (entry !== null) {
      this.set({ files: sortedByFileId([...this.state.files, entry]) });
    }
  }

  /** Delete after confirmation; a declined confirmation sends nothing. */
  async remove(fileId: number): Promise<void> {
    const entry = this.state.files.find((f) => f.file_id === fileId);
    const label = entry === undefined ? `file ${fileId}` : entry.name;
    if (!this.confirm(`Delete ${label}?`)) {
      return;
    }
    const result = await this.guarded(async (token) => {
      await this.api.deleteFile(token, fileId);
      return true;
    });
    if (result !== null) {
      this.set({ files: this.state.files.filter((f) => f.file_id !== fileId) });
    }
  }

  async openAdmin(): Promise<void> {
    const session = this.state.session;
    if (session === null || session.role !== "administrator") {
      return;
    }
    const loaded = await this.guarded(async (token) => {
      const users = await this.api.listUsers(token);
      const groups = await this.api.listGroups(token);
      return { users, groups };
    });
    if (loaded !== null) {
      this.set({ view: "admin", admin: loaded, notice: null });
    }
  }

  private withAdmin(update: (admin: AdminData) => AdminData): void {
    if (this.state.admin !== null) {
      this.set({ admin: update(this.state.admin) });
    }
  }

  async addUser(uid: string, password: string, role: RoleName): Promise<void> {
    const entry = await this.guarded((token) => this.api.addUser(token, uid, password, role));
    if (entry !== null) {
      this.withAdmin((admin) => ({ ...admin, users: [...admin.users, entry] }));
    }
  }

  async deleteUser(uid: string): Promise<void> {
    const done = await this.guarded(async (token) => {
      await this.api.deleteUser(token, uid);
      return true;
    });
    if (done !== null) {
      this.withAdmin((admin) => ({
        ...admin,
        users: admin.users.filter((u) => u.uid !== uid),
      }));
    }
  }

  async setUserRole(uid: string, role: RoleName): Promise<void> {
    const done = await this.guarded(async (token) => {
      await this.api.modifyUser(token, uid, { role });
      return true;
    });
    if (done !== null) {
      this.withAdmin((admin) => ({
        ...admin,
        users: admin.users.map((u) => (u.uid === uid ? { ...u, role } : u)),
      }));
    }
  }

  async setUserPassword(uid: string, password: string): Promise<void> {
    await this.guarded(async (token) => {
      await this.api.modifyUser(token, uid, { password });
      return true;
    });
  }

  async createGroup(name: string): Promise<void> {
    const entry = await this.guarded((token) => this.api.createGroup(token, name));
    if (entry !== null) {
      this.withAdmin((admin) => ({ ...admin, groups: [...admin.groups, entry] }));
    }
  }

  async deleteGroup(groupId: number): Promise<void> {
    const done = await this.guarded(async (token) => {
      await this.api.deleteGroup(token, groupId);
      return true;
    });
    if (done !== null) {
      this.withAdmin((admin) => ({
        ...admin,
        groups: admin.groups.filter((g) => g.group_id !== groupId),
      }));
    }
  }

  async addMember(groupId: number, uid: string): Promise<void> {
    const done = await this.guarded(async (token) => {
      await this.api.addMember(token, groupId, uid);
      return true;
    });
    if (done !== null) {
      this.withAdmin((admin) => ({
        ...admin,
        groups: admin.groups.map((g) =>
          g.group_id === groupId && !g.members.includes(uid)
            ? { ...g, members: [...g.members, uid] }
            : g,
        ),
      }));
    }
  }

  async removeMember(groupId: number, uid: string): Promise<void> {
    const done = await this.guarded(async (token) => {
      await this.api.removeMember(token, groupId, uid);
      return true;
    });
    if (done !== null) {
      this.withAdmin((admin) => ({
        ...admin,
        groups: admin.groups.map((g) =>
          g.group_id === groupId
            ? { ...g, members: g.members.filter((m) => m !== uid) }
            : g,
        ),
      }));
    }
  }

  async bindCertificate(certificate: File): Promise<void> {
    const result = await this.guarded((token) => this.api.bindCertificate(token, certificate));
    if (result === null) {
      return;
    }
    this.withAdmin((admin) => {
      if (admin.users.some((u) => u.uid === result.uid)) {
        return {
          ...admin,
          users: admin.users.map((u) =>
            u.uid === result.uid ? { ...u, has_certificate: true } : u,
          ),
        };
      }
      const created: UserEntry = { uid: result.uid, role: "normal", has_certificate: true };
      return { ...admin, users: [...admin.users, created] };
    });
  }

  async unbindCertificate(uid: string): Promise<void> {
    const done = await this.guarded(async (token) => {
      await this.api.unbindCertificate(token, uid);
      return true;
    });
    if (done !== null) {
      this.withAdmin((admin) => ({
        ...admin,
        users: admin.users.map((u) =>
          u.uid === uid ? { ...u, has_certificate: false } : u,
        ),
      }));
    }
  }
}
