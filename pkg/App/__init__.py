from flask import Flask
from flask_sqlalchemy import SQLAlchemy
import logging

db = SQLAlchemy()


def create_app(overrides=None):
    app = Flask(__name__)

    # Configurações da aplicação
    app.config['SQLALCHEMY_DATABASE_URI'] = 'sqlite:///database.db'
    app.config['SQLALCHEMY_TRACK_MODIFICATIONS'] = False
    app.config['LOG_LEVEL'] = 'INFO'
    app.config['OUT_DIR'] = 'out'
    app.config.update(overrides or {})

    logging.basicConfig(
        level=getattr(logging, app.config['LOG_LEVEL'], logging.INFO),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )

    db.init_app(app)

    from .View.experimentos import experimentos_bp
    app.register_blueprint(experimentos_bp)

    from .cli import COMANDOS
    for comando in COMANDOS:
        app.cli.add_command(comando)

    # Importar os modelos para que o SQLAlchemy os reconheça
    from .Models import Experimento, ResultadoExpressao

    with app.app_context():
        db.create_all()

    return app
