import logging

from sqlalchemy.exc import SQLAlchemyError

from ..Models import Experimento, ResultadoExpressao
from .. import db
from ..config import config_hash

logger = logging.getLogger(__name__)


class ExperimentoController:
    """Registro de execuções e resultados (consulta apenas; os artefatos em disco são a fonte)"""

    @staticmethod
    def registrar_experimento(etapa, cfg, out_dir, metadados):
        """
        Registra uma execução de etapa

        Returns:
            Experimento | None: None se o registro falhar (a etapa não falha por isso)
        """
        try:
            experimento = Experimento(
                etapa=etapa,
                behavior=cfg.behavior,
                seed=cfg.seed,
                config_hash=config_hash(cfg),
                out_dir=out_dir,
                metadados_json=metadados,
            )
            db.session.add(experimento)
            db.session.commit()
            logger.debug(f"✅ Experimento {experimento.id} registrado ({etapa})")
            return experimento
        except RuntimeError as e:
            logger.warning(f"⚠️ Registro indisponível fora do contexto da aplicação: {e}")
            return None
        except SQLAlchemyError as e:
            db.session.rollback()
            logger.warning(f"⚠️ Não foi possível registrar a etapa '{etapa}': {e}")
            return None

    @staticmethod
    def registrar_resultados(experimento, entries):
        """Grava as expressões ranqueadas de uma regressão; devolve a quantidade gravada"""
        if experimento is None:
            return 0
        try:
            for entry in entries:
                db.session.add(ResultadoExpressao(
                    experimento_id=experimento.id,
                    rank=entry.rank,
                    expressao=entry.text,
                    complexidade=int(entry.complexity),
                    mse=float(entry.mse),
                    aptidao=float(entry.fitness),
                    geracao=int(entry.generation),
                ))
            db.session.commit()
            return len(entries)
        except SQLAlchemyError as e:
            db.session.rollback()
            logger.warning(f"⚠️ Não foi possível registrar os resultados do experimento {experimento.id}: {e}")
            return 0

    @staticmethod
    def listar_experimentos(etapa=None, behavior=None):
        query = Experimento.query
        if etapa:
            query = query.filter_by(etapa=etapa)
        if behavior:
            query = query.filter_by(behavior=behavior)
        experimentos = query.order_by(Experimento.id).all()
        return {
            'success': True,
            'message': f'{len(experimentos)} experimento(s) encontrado(s)',
            'data': [e.to_dict() for e in experimentos],
        }

    @staticmethod
    def obter_experimento(experimento_id):
        experimento = db.session.get(Experimento, experimento_id)
        if not experimento:
            return {
                'success': False,
                'message': 'Experimento não encontrado',
                'data': None,
            }
        return {
            'success': True,
            'message': 'Experimento encontrado',
            'data': experimento.to_dict(),
        }

    @staticmethod
    def listar_resultados(experimento_id):
        experimento = db.session.get(Experimento, experimento_id)
        if not experimento:
            return {
                'success': False,
                'message': 'Experimento não encontrado',
                'data': None,
            }
        resultados = (
            ResultadoExpressao.query
            .filter_by(experimento_id=experimento_id)
            .order_by(ResultadoExpressao.rank)
            .all()
        )
        return {
            'success': True,
            'message': f'{len(resultados)} resultado(s)',
            'data': [r.to_dict() for r in resultados],
        }
