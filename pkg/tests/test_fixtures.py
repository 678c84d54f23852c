import subprocess
import sys

import pytest

from fixtures import generate
from mcabe import wire
from mcabe.core import Privilege

FILES = sorted(generate.DATA.glob("*.bin"))


def _type_name(path):
    stem = path.stem.rsplit("-", 1)[0]
    return None if stem.startswith("flow") else stem


def test_corpus_covers_every_type():
    names = {_type_name(p) for p in FILES} - {None}
    assert names == {cls.__name__ for cls in generate.SAMPLERS}
    assert len(FILES) == len(generate.SAMPLERS) * generate.PER_TYPE + 6


@pytest.mark.parametrize("path", FILES, ids=lambda p: p.name)
def test_fixture_reencodes_bit_exact(path):
    data = path.read_bytes()
    value = wire.decode(data)
    expect = _type_name(path)
    if expect is not None:
        assert type(value).__name__ == expect
    assert wire.encode(value) == data


def test_regeneration_reproduces_corpus():
    built = generate.build()
    assert sorted(built) == [p.name for p in FILES]
    for path in FILES:
        assert built[path.name] == path.read_bytes(), path.name


def test_regeneration_in_fresh_interpreter(tmp_path):
    # separate process: no shared state, different hash seed
    code = ("import sys; sys.path.insert(0, sys.argv[1]); from fixtures import generate; "
            "import hashlib; b = generate.build(); "
            "print(hashlib.sha256(b''.join(k.encode() + b[k] for k in sorted(b))).hexdigest())")
    env = {"PYTHONHASHSEED": "12345", "PATH": ""}
    out = subprocess.run([sys.executable, "-c", code, str(generate.HERE.parent)], env=env,
                         capture_output=True, text=True, check=True).stdout.strip()
    import hashlib
    here = b"".join(p.name.encode() + p.read_bytes() for p in FILES)
    assert out == hashlib.sha256(here).hexdigest()


def test_flow_fixture_still_decrypts():
    load = lambda n: wire.decode((generate.DATA / f"flow-{n}.bin").read_bytes())  # noqa: E731
    from mcabe import core

    sk, ct, msg, sig = load("sk"), load("ct"), load("message"), load("signature")
    out = core.decrypt_dsp(sk, ct, Privilege.READ)
    assert out == msg.m * sig.sig
    assert out == load("partial")
