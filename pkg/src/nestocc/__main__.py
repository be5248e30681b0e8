"""Module entrypoint for ``python -m nestocc``."""

from __future__ import annotations

from .cli import main

raise SystemExit(main())
