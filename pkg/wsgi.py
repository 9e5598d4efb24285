"""
WSGI entry point for the estimation service

    gunicorn --bind=0.0.0.0:8080 wsgi:app
"""

import os

from basketsim import create_app

app = create_app()

if __name__ == "__main__":
    app.run(host="0.0.0.0", port=int(os.getenv("PORT", "8080")))
