/**
 * DOM renderer.  Applies a view model to the page and wires controls
 * to store actions.  All user-supplied strings go through textContent,
 * never through markup.
 */

import { RoleName } from "./api.js";
import { AppStore } from "./state.js";
import { AdminView, FilesView, LoginView, ViewModel } from "./views.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  text?: string,
  className?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (text !== undefined) {
    node.textContent = text;
  }
  if (className !== undefined) {
    node.className = className;
  }
  return node;
}

function button(label: string, onClick: () => void): HTMLButtonElement {
  const node = el("button", label);
  node.type = "button";
  node.addEventListener("click", onClick);
  return node;
}

function saveBlob(name: string, blob: Blob): void {
  const url = URL.createObjectURL(blob);
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = name;
  anchor.click();
  URL.revokeObjectURL(url);
}

function topbar(uid: string, store: AppStore, adminLink: boolean, onFiles: boolean): HTMLElement {
  const bar = el("div", undefined, "topbar");
  bar.appendChild(el("h1", "Secure File Exchange Service"));
  const right = el("div");
  right.appendChild(el("span", `signed on as ${uid} `));
  if (adminLink && onFiles) {
    right.appendChild(button("administration", () => store.navigate("admin")));
  }
  if (!onFiles) {
    right.appendChild(button("files", () => store.navigate("files")));
  }
  right.appendChild(button("log off", () => void store.logout()));
  bar.appendChild(right);
  return bar;
}

function renderLogin(view: LoginView, store: AppStore): HTMLElement {
  const page = el("div");
  page.appendChild(el("h1", "Secure File Exchange Service"));
  page.appendChild(
    el("p", "Log on with your username and password. Your browser must "
      + "present your client certificate for this connection."),
  );
  if (view.error !== null) {
    page.appendChild(el("p", view.error, "error"));
  }
  const form = el("form");
  const username = el("input");
  username.name = "username";
  username.autocomplete = "username";
  const password = el("input");
  password.name = "password";
  password.type = "password";
  password.autocomplete = "current-password";
  const submit = el("button", "Log on");
  submit.type = "submit";
  const usernameLabel = el("label", "Username ");
  usernameLabel.appendChild(username);
  const passwordLabel = el("label", "Password ");
  passwordLabel.appendChild(password);
  form.append(usernameLabel, el("br"), passwordLabel, el("br"), submit);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void store.login(username.value, password.value);
  });
  page.appendChild(form);
  return page;
}

function renderFiles(view: FilesView, store: AppStore): HTMLElement {
  const page = el("div");
  page.appendChild(topbar(view.uid, store, view.adminLink, true));
  if (view.notice !== null) {
    page.appendChild(el("p", view.notice, "notice"));
  }

  page.appendChild(el("h2", "Files"));
  const table = el("table");
  const head = el("tr");
  for (const title of ["Name", "Owner", "Size", "Uploaded", "Actions"]) {
    head.appendChild(el("th", title));
  }
  table.appendChild(head);
  for (const row of view.rows) {
    const tr = el("tr");
    tr.appendChild(el("td", row.name));
    tr.appendChild(el("td", row.owner));
    tr.appendChild(el("td", String(row.sizeBytes)));
    tr.appendChild(el("td", row.uploadedAt));
    const actions = el("td");
    for (const action of row.actions) {
      if (action === "download") {
        actions.appendChild(button("download", () => {
          void store.download(row.fileId).then((result) => {
            if (result !== null) {
              saveBlob(result.name, result.blob);
            }
          });
        }));
      } else {
        actions.appendChild(button("delete", () => void store.remove(row.fileId)));
      }
    }
    tr.appendChild(actions);
    table.appendChild(tr);
  }
  page.appendChild(table);

  const uploadForm = el("form", undefined, "inline");
  const picker = el("input");
  picker.type = "file";
  const uploadButton = el("button", "upload");
  uploadButton.type = "submit";
  uploadForm.append(picker, uploadButton);
  uploadForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const file = picker.files?.[0];
    if (file !== undefined) {
      void store.upload(file).then(() => { picker.value = ""; });
    }
  });
  page.appendChild(uploadForm);
  page.appendChild(button("refresh", () => void store.refreshFiles()));
  return page;
}

function renderAdmin(view: AdminView, store: AppStore): HTMLElement {
  const page = el("div");
  page.appendChild(topbar(view.uid, store, true, false));
  if (view.notice !== null) {
    page.appendChild(el("p", view.notice, "notice"));
  }

  page.appendChild(el("h2", "Users"));
  const users = el("table");
  const userHead = el("tr");
  for (const title of ["User", "Role", "Certificate", "Actions"]) {
    userHead.appendChild(el("th", title));
  }
  users.appendChild(userHead);
  for (const user of view.users) {
    const tr = el("tr");
    tr.appendChild(el("td", user.uid));
    tr.appendChild(el("td", user.role));
    tr.appendChild(el("td", user.has_certificate ? "bound" : "none"));
    const actions = el("td");
    const otherRole: RoleName = user.role === "administrator" ? "normal" : "administrator";
    actions.appendChild(button(`make ${otherRole}`, () => void store.setUserRole(user.uid, otherRole)));
    actions.appendChild(button("set password", () => {
      const password = window.prompt(`New password for ${user.uid}:`);
      if (password !== null && password !== "") {
        void store.setUserPassword(user.uid, password);
      }
    }));
    if (user.has_certificate) {
      actions.appendChild(button("unbind certificate", () => void store.unbindCertificate(user.uid)));
    }
    actions.appendChild(button("remove", () => void store.deleteUser(user.uid)));
    tr.appendChild(actions);
    users.appendChild(tr);
  }
  page.appendChild(users);

  const addUserForm = el("form", undefined, "inline");
  const uid = el("input");
  uid.placeholder = "username";
  const password = el("input");
  password.type = "password";
  password.placeholder = "password";
  const role = el("select");
  for (const value of ["normal", "administrator"]) {
    const option = el("option", value);
    option.value = value;
    role.appendChild(option);
  }
  const addButton = el("button", "add user");
  addButton.type = "submit";
  addUserForm.append(uid, password, role, addButton);
  addUserForm.addEventListener("submit", (event) => {
    event.preventDefault();
    if (uid.value !== "") {
      void store.addUser(uid.value, password.value, role.value as RoleName);
    }
  });
  page.appendChild(addUserForm);

  const bindForm = el("form", undefined, "inline");
  const certPicker = el("input");
  certPicker.type = "file";
  const bindButton = el("button", "upload certificate");
  bindButton.type = "submit";
  bindForm.append(certPicker, bindButton);
  bindForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const file = certPicker.files?.[0];
    if (file !== undefined) {
      void store.bindCertificate(file).then(() => { certPicker.value = ""; });
    }
  });
  page.appendChild(bindForm);

  page.appendChild(el("h2", "Groups"));
  const groups = el("table");
  const groupHead = el("tr");
  for (const title of ["Group", "Members", "Actions"]) {
    groupHead.appendChild(el("th", title));
  }
  groups.appendChild(groupHead);
  for (const group of view.groups) {
    const tr = el("tr");
    tr.appendChild(el("td", group.name));
    const members = el("td");
    for (const member of group.members) {
      const chip = el("span", `${member} `);
      chip.appendChild(button("x", () => void store.removeMember(group.group_id, member)));
      members.appendChild(chip);
    }
    tr.appendChild(members);
    const actions = el("td");
    actions.appendChild(button("add member", () => {
      const member = window.prompt(`Add which user to ${group.name}?`);
      if (member !== null && member !== "") {
        void store.addMember(group.group_id, member);
      }
    }));
    actions.appendChild(button("remove group", () => void store.deleteGroup(group.group_id)));
    tr.appendChild(actions);
    groups.appendChild(tr);
  }
  page.appendChild(groups);

  const groupForm = el("form", undefined, "inline");
  const groupName = el("input");
  groupName.placeholder = "group name";
  const groupButton = el("button", "add group");
  groupButton.type = "submit";
  groupForm.append(groupName, groupButton);
  groupForm.addEventListener("submit", (event) => {
    event.preventDefault();
    if (groupName.value !== "") {
      void store.createGroup(groupName.value);
    }
  });
  page.appendChild(groupForm);
  return page;
}

export function renderInto(target: HTMLElement, view: ViewModel, store: AppStore): void {
  target.replaceChildren();
  if (view.kind === "login") {
    target.appendChild(renderLogin(view, store));
  } else if (view.kind === "files") {
    target.appendChild(renderFiles(view, store));
  } else {
    target.appendChild(renderAdmin(view, store));
  }
}
