"""Request and response bodies for the HTTP API."""
from __future__ import annotations

from pydantic import BaseModel, Field


class LoginResponse(BaseModel):
    token: str
    uid: str
    role: str


class OkResponse(BaseModel):
    ok: bool = True


class FileEntry(BaseModel):
    file_id: int
    name: str
    owner_uid: str
    size_bytes: int
    uploaded_at: str
    rights: list[str]


class FileListResponse(BaseModel):
    files: list[FileEntry]


class AclGrant(BaseModel):
    group_id: int
    rights: list[str]


class AclUpdate(BaseModel):
    grants: list[AclGrant]


class AclResponse(BaseModel):
    file_id: int
    grants: list[AclGrant]


class UserAddRequest(BaseModel):
    uid: str = Field(min_length=1)
    password: str
    role: str = "normal"


class UserModifyRequest(BaseModel):
    password: str | None = None
    role: str | None = None


class UserEntry(BaseModel):
    uid: str
    role: str
    has_certificate: bool


class UserListResponse(BaseModel):
    users: list[UserEntry]


class GroupCreateRequest(BaseModel):
    name: str = Field(min_length=1)


class MemberRequest(BaseModel):
    uid: str = Field(min_length=1)


class GroupEntry(BaseModel):
    group_id: int
    name: str
    members: list[str]


class GroupListResponse(BaseModel):
    groups: list[GroupEntry]


class CertBindResponse(BaseModel):
    uid: str
    created: bool
