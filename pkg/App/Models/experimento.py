from datetime import datetime

from sqlalchemy import (
    Column, Integer, String, DateTime, Float, ForeignKey
)
from sqlalchemy.dialects.sqlite import JSON
from sqlalchemy.orm import relationship
from .. import db


class Experimento(db.Model):
    __tablename__ = 'experimento'
    id               = Column(Integer, primary_key=True, autoincrement=True)
    etapa            = Column(String, nullable=False)            # simulate, train-surrogate, regress...
    behavior         = Column(String, nullable=False)            # hex, square, boids
    seed             = Column(Integer, nullable=False)
    config_hash      = Column(String(64), nullable=False)
    out_dir          = Column(String, nullable=False)            # diretório dos artefatos da etapa
    metadados_json   = Column(JSON, nullable=False)              # cópia do metadata.json
    criado_em        = Column(DateTime, nullable=False, default=datetime.now)

    def to_dict(self):
        return {
            'id': self.id,
            'etapa': self.etapa,
            'behavior': self.behavior,
            'seed': self.seed,
            'config_hash': self.config_hash,
            'out_dir': self.out_dir,
            'metadados': self.metadados_json,
            'criado_em': self.criado_em.isoformat() if self.criado_em else None,
        }

    def __repr__(self):
        return f"<Experimento(id={self.id}, etapa={self.etapa}, behavior={self.behavior}, seed={self.seed})>"


class ResultadoExpressao(db.Model):
    __tablename__ = 'resultado_expressao'
    id               = Column(Integer, primary_key=True, autoincrement=True)
    experimento_id   = Column(Integer, ForeignKey('experimento.id'), nullable=False)
    rank             = Column(Integer, nullable=False)
    expressao        = Column(String, nullable=False)            # texto serializado com parâmetros
    complexidade     = Column(Integer, nullable=False)
    mse              = Column(Float, nullable=False)
    aptidao          = Column(Float, nullable=False)
    geracao          = Column(Integer, nullable=False)           # geração em que a estrutura apareceu

    experimento      = relationship("Experimento", backref="resultados")

    def to_dict(self):
        return {
            'rank': self.rank,
            'expressao': self.expressao,
            'complexidade': self.complexidade,
            'mse': self.mse,
            'aptidao': self.aptidao,
            'geracao': self.geracao,
        }

    def __repr__(self):
        return f"<ResultadoExpressao(experimento={self.experimento_id}, rank={self.rank}, mse={self.mse})>"
