from typing import Dict, Any
from pathlib import Path
from jinja2 import Environment, FileSystemLoader, StrictUndefined
import functools

from app.core.config import settings
from app.core.exceptions import TransportError


class TemplateManager:
    def __init__(self, templates_dir: str = settings.TEMPLATES_DIR):
        self.templates_dir = Path(templates_dir)
        self.env = Environment(
            loader=FileSystemLoader(str(self.templates_dir)),
            autoescape=False,
            undefined=StrictUndefined,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
        )

    @functools.lru_cache(maxsize=settings.TEMPLATE_CACHE_SIZE)
    def get_template(self, template_path: str):
        """Get template with caching."""
        return self.env.get_template(template_path)

    def render(self, template_path: str, variables: Dict[str, Any]) -> str:
        """Render a CSV header/summary block; every line starts with '#'."""
        try:
            return self.get_template(template_path).render(**variables)
        except Exception as e:
            raise TransportError(f"Error rendering template {template_path}: {str(e)}") from e


template_manager = TemplateManager()
