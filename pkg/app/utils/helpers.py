import io
from pathlib import Path
from typing import Optional

import pandas as pd

from app.core.config import settings
from app.services.profile_service import DensityProfile
from app.services.template_manager import template_manager


def render_profile(profile: DensityProfile) -> str:
    """
    Render a profile as CSV text: '#' header block, data rows, optional summary lines.

    Args:
    profile (DensityProfile): The tabulated energy density and its provenance.

    Returns:
    str: The complete CSV document.
    """
    header = template_manager.render(
        "csv/header.jinja2",
        {"engine": profile.engine, "params": profile.params, "metadata": profile.metadata},
    )
    buffer = io.StringIO()
    profile.frame.to_csv(buffer, index=False, float_format=settings.CSV_FLOAT_FORMAT, lineterminator="\n")
    summary = template_manager.render("csv/summary.jinja2", {"summary": profile.summary})
    return header + buffer.getvalue() + summary


def save_profile(profile: DensityProfile, path: Optional[str] = None) -> str:
    """
    Write the rendered profile to ``path`` (parents created) and return the text.
    """
    text = render_profile(profile)
    if path:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")
    return text


def load_profile(path: str) -> pd.DataFrame:
    """Read the data rows of a written profile back, skipping '#' lines."""
    return pd.read_csv(path, comment="#", float_precision="round_trip")
