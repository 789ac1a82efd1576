/**
 * Pure view models.
 *
 * ``renderView`` maps the application state to a plain description of
 * what the page must show.  The gating rules live entirely here, so
 * they can be tested without a DOM:
 *
 * - without a session only the login view exists, whatever ``view`` says;
 * - a file row offers exactly the actions its rights allow;
 * - the admin panel exists only for an administrator session.
 */

import { FileEntry, GroupEntry, Right, UserEntry } from "./api.js";
import { ViewState } from "./state.js";

export type FileAction = "download" | "delete";

export interface FileRow {
  fileId: number;
  name: string;
  owner: string;
  sizeBytes: number;
  uploadedAt: string;
  actions: FileAction[];
}

export interface LoginView {
  kind: "login";
  error: string | null;
}

export interface FilesView {
  kind: "files";
  uid: string;
  rows: FileRow[];
  adminLink: boolean;
  notice: string | null;
}

export interface AdminView {
  kind: "admin";
  uid: string;
  users: UserEntry[];
  groups: GroupEntry[];
  notice: string | null;
}

export type ViewModel = LoginView | FilesView | AdminView;

export function actionsFor(rights: Right[]): FileAction[] {
  const actions: FileAction[] = [];
  if (rights.includes("download")) {
    actions.push("download");
  }
  if (rights.includes("delete")) {
    actions.push("delete");
  }
  return actions;
}

function fileRow(entry: FileEntry): FileRow {
  return {
    fileId: entry.file_id,
    name: entry.name,
    owner: entry.owner_uid,
    sizeBytes: entry.size_bytes,
    uploadedAt: entry.uploaded_at,
    actions: actionsFor(entry.rights),
  };
}

export function renderView(state: ViewState): ViewModel {
  if (state.session === null) {
    return { kind: "login", error: state.loginError };
  }
  const isAdmin = state.session.role === "administrator";
  if (state.view === "admin" && isAdmin && state.admin !== null) {
    return {
      kind: "admin",
      uid: state.session.uid,
      users: state.admin.users,
      groups: state.admin.groups,
      notice: state.notice,
    };
  }
  return {
    kind: "files",
    uid: state.session.uid,
    rows: state.files.map(fileRow),
    adminLink: isAdmin,
    notice: state.notice,
  };
}
