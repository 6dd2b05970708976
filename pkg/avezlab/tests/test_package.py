from pathlib import Path

import avezlab

SETUP = Path(__file__).resolve().parents[2] / "setup.py"


def test_project_metadata():
    assert avezlab.__author__ == "avezlab developers"
    assert 'author_email="avezlab@users.noreply.github.com"' in SETUP.read_text()
