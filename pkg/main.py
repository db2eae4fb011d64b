from flask import Flask, jsonify

from endpoints import api_bp
from utils.logging import init_logging_from_env
from utils.settings import VERSION

# Initialize logging
init_logging_from_env()

app = Flask(__name__)


app.register_blueprint(api_bp)


@app.get("/")
def read_root():
    return jsonify(
        {
            "service": "coc-meanfield",
            "version": VERSION,
            "endpoints": [
                "GET /health",
                "POST /api/validate",
                "POST /api/h-eval",
                "POST /api/speed-range",
                "POST /api/fixed-point",
                "POST /api/dmono-check",
                "GET /admin/cache/health",
                "POST /admin/cache/clear",
            ],
        }
    )
