"""Download-and-cache for public structure files."""

from __future__ import annotations

import os
import re
import tempfile
import urllib.error
import urllib.request
from pathlib import Path

from filelock import FileLock

from .errors import CorruptDownloadError, FetchError

CACHE_ENV = "STERICZIP_CACHE"
URL_TEMPLATE = "https://files.rcsb.org/download/{id}.pdb"
TIMEOUT = 30.0

_ID = re.compile(r"^[0-9][A-Za-z0-9]{3}$")


def cache_dir(override=None) -> Path:
    """``override``, else $STERICZIP_CACHE, else ~/.cache/stericzip."""
    if override:
        return Path(override)
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "stericzip"


def _check_payload(data: bytes, expected_length, struct_id: str) -> None:
    if expected_length is not None and len(data) != expected_length:
        raise CorruptDownloadError(
            f"{struct_id}: received {len(data)} bytes, server announced {expected_length}"
        )
    if not data.strip():
        raise CorruptDownloadError(f"{struct_id}: empty download")
    text = data.decode("ascii", errors="replace")
    if not re.search(r"^(ATOM  |HETATM)", text, re.MULTILINE):
        raise CorruptDownloadError(f"{struct_id}: download contains no ATOM records")
    if not re.search(r"^END", text.rstrip().splitlines()[-1]):
        raise CorruptDownloadError(f"{struct_id}: download is truncated (no END record)")


def fetch_template(struct_id: str, cache=None, opener=None) -> Path:
    """Path to the cached PDB file for ``struct_id``, downloading it on a miss.

    Writes are atomic and serialized with a lock file, so concurrent callers
    sharing a cache see either no file or a complete one. ``opener`` replaces
    ``urllib.request.urlopen`` (tests use it to avoid the network).
    """
    if not isinstance(struct_id, str) or not _ID.match(struct_id):
        raise ValueError(f"structure id must be 4 characters starting with a digit, got {struct_id!r}")
    struct_id = struct_id.upper()
    root = cache_dir(cache)
    target = root / f"{struct_id}.pdb"
    if target.is_file():
        return target
    root.mkdir(parents=True, exist_ok=True)
    with FileLock(str(root / f"{struct_id}.pdb.lock")):
        if target.is_file():
            return target
        url = URL_TEMPLATE.format(id=struct_id)
        open_url = opener or urllib.request.urlopen
        try:
            with open_url(url, timeout=TIMEOUT) as resp:
                length = resp.headers.get("Content-Length") if getattr(resp, "headers", None) else None
                data = resp.read()
        except urllib.error.HTTPError as exc:
            raise FetchError(f"{struct_id}: server answered HTTP {exc.code} for {url}", status=exc.code) from None
        except (urllib.error.URLError, OSError) as exc:
            reason = getattr(exc, "reason", exc)
            raise FetchError(
                f"{struct_id}: could not reach {url} ({reason}); "
                "download the file elsewhere and pass it with --template PATH"
            ) from None
        _check_payload(data, int(length) if length else None, struct_id)
        fd, tmp = tempfile.mkstemp(dir=root, prefix=f".{struct_id}.", suffix=".part")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, target)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
    return target
