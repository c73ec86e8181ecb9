import io
import urllib.error

import pytest

from stericzip.errors import CorruptDownloadError, FetchError
from stericzip.fetch import CACHE_ENV, cache_dir, fetch_template

GOOD = (
    b"ATOM      1  CA  GLY A 127     -16.196   8.315   1.061  1.00  0.00           C\n"
    b"END\n"
)


class _Response(io.BytesIO):
    def __init__(self, data, length=None):
        super().__init__(data)
        self.headers = {"Content-Length": str(len(data) if length is None else length)}


def _opener(data, length=None, calls=None):
    def open_url(url, timeout):
        if calls is not None:
            calls.append(url)
        return _Response(data, length)

    return open_url


def test_download_then_cache_hit(tmp_path):
    calls = []
    path = fetch_template("3nhd", cache=tmp_path, opener=_opener(GOOD, calls=calls))
    assert path == tmp_path / "3NHD.pdb"
    assert path.read_bytes() == GOOD
    assert calls == ["https://files.rcsb.org/download/3NHD.pdb"]
    again = fetch_template("3NHD", cache=tmp_path, opener=_opener(b"", calls=calls))
    assert again == path and len(calls) == 1
    assert not list(tmp_path.glob("*.part"))


@pytest.mark.parametrize(
    "data, length",
    [
        (GOOD, len(GOOD) + 10),  # short read
        (b"", None),
        (b"REMARK nothing here\nEND\n", None),
        (GOOD[:-4], None),  # no END
    ],
)
def test_corrupt_downloads_not_cached(tmp_path, data, length):
    with pytest.raises(CorruptDownloadError):
        fetch_template("3NHD", cache=tmp_path, opener=_opener(data, length))
    assert not (tmp_path / "3NHD.pdb").exists()


def test_http_error(tmp_path):
    def open_url(url, timeout):
        raise urllib.error.HTTPError(url, 404, "Not Found", {}, None)

    with pytest.raises(FetchError) as info:
        fetch_template("9ZZZ", cache=tmp_path, opener=open_url)
    assert info.value.status == 404
    assert info.value.exit_code == 5


def test_network_down_mentions_template_flag(tmp_path):
    def open_url(url, timeout):
        raise urllib.error.URLError("no route")

    with pytest.raises(FetchError, match="--template"):
        fetch_template("3NHD", cache=tmp_path, opener=open_url)


@pytest.mark.parametrize("bad", ["", "3NH", "NHD3", "3NHD.pdb", "../x", 3])
def test_bad_ids(tmp_path, bad):
    with pytest.raises(ValueError):
        fetch_template(bad, cache=tmp_path, opener=_opener(GOOD))


def test_cache_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv(CACHE_ENV, str(tmp_path / "env"))
    assert cache_dir() == tmp_path / "env"
    assert cache_dir(tmp_path) == tmp_path
    monkeypatch.delenv(CACHE_ENV)
    assert cache_dir().name == "stericzip"
