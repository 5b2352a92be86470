#!/usr/bin/env python3
"""
Script para limpeza do registro de experimentos e dos artefatos gerados

Este script permite limpar o registro (tabelas experimento e
resultado_expressao) e, opcionalmente, os diretórios de artefatos,
mantendo a estrutura das tabelas intacta.

Uso:
    python script/clean_database.py [opções]

Opções:
    --all               Limpa todo o registro (experimentos e resultados)
    --results           Limpa apenas as expressões ranqueadas
    --stage ETAPA       Limpa apenas os experimentos de uma etapa (ex.: regress)
    --artifacts DIR     Remove também o diretório de artefatos DIR
    --confirm           Confirma a operação sem prompt interativo
    --status            Mostra apenas o status do registro

Exemplos:
    python script/clean_database.py --stage simulate --confirm
    python script/clean_database.py --all --artifacts out
"""

import sys
import os
import argparse
import shutil
from datetime import datetime

# Adiciona o diretório raiz ao path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from App import create_app, db
from App.Models import Experimento, ResultadoExpressao


class DatabaseCleaner:
    """Classe para limpeza controlada do registro"""

    def __init__(self, app):
        self.app = app

    def clean_results(self):
        """Limpa as expressões ranqueadas"""
        with self.app.app_context():
            try:
                count = ResultadoExpressao.query.count()
                ResultadoExpressao.query.delete()
                db.session.commit()
                print(f"✅ {count} resultados removidos")
                return True
            except Exception as e:
                db.session.rollback()
                print(f"❌ Erro ao limpar resultados: {e}")
                return False

    def clean_stage(self, etapa):
        """Limpa os experimentos de uma etapa (e seus resultados)"""
        with self.app.app_context():
            try:
                ids = [e.id for e in Experimento.query.filter_by(etapa=etapa).all()]
                if ids:
                    ResultadoExpressao.query.filter(ResultadoExpressao.experimento_id.in_(ids)).delete(
                        synchronize_session=False
                    )
                    Experimento.query.filter(Experimento.id.in_(ids)).delete(synchronize_session=False)
                db.session.commit()
                print(f"✅ {len(ids)} experimentos da etapa '{etapa}' removidos")
                return True
            except Exception as e:
                db.session.rollback()
                print(f"❌ Erro ao limpar a etapa '{etapa}': {e}")
                return False

    def clean_all(self):
        """Limpa todo o registro"""
        print("🧹 Limpando o registro de experimentos...")
        success = self.clean_results()
        with self.app.app_context():
            try:
                count = Experimento.query.count()
                Experimento.query.delete()
                db.session.commit()
                print(f"✅ {count} experimentos removidos")
            except Exception as e:
                db.session.rollback()
                print(f"❌ Erro ao limpar experimentos: {e}")
                success = False
        return success

    @staticmethod
    def clean_artifacts(diretorio):
        """Remove o diretório de artefatos"""
        if not os.path.isdir(diretorio):
            print(f"⚠️  Diretório {diretorio} não existe")
            return True
        try:
            shutil.rmtree(diretorio)
            print(f"✅ Artefatos em {diretorio} removidos")
            return True
        except OSError as e:
            print(f"❌ Erro ao remover {diretorio}: {e}")
            return False

    def get_database_status(self):
        """Mostra o status atual do registro"""
        with self.app.app_context():
            print("\n📊 STATUS ATUAL DO REGISTRO:")
            print("=" * 50)

            try:
                print(f"🧪 Experimentos: {Experimento.query.count()}")
                for etapa, in db.session.query(Experimento.etapa).distinct().order_by(Experimento.etapa):
                    print(f"   - {etapa}: {Experimento.query.filter_by(etapa=etapa).count()}")
                print(f"📈 Resultados: {ResultadoExpressao.query.count()}")
                print("=" * 50)
            except Exception as e:
                print(f"❌ Erro ao consultar status: {e}")


def confirm_action(message):
    """Solicita confirmação do usuário"""
    response = input(f"\n⚠️  {message} (s/N): ").lower().strip()
    return response in ['s', 'sim', 'y', 'yes']


def main():
    parser = argparse.ArgumentParser(
        description="Script para limpeza do registro de experimentos",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__
    )

    parser.add_argument('--all', action='store_true',
                        help='Limpa todo o registro')
    parser.add_argument('--results', action='store_true',
                        help='Limpa apenas as expressões ranqueadas')
    parser.add_argument('--stage', default=None,
                        help='Limpa os experimentos de uma etapa')
    parser.add_argument('--artifacts', default=None,
                        help='Remove também o diretório de artefatos')
    parser.add_argument('--confirm', action='store_true',
                        help='Confirma a operação sem prompt')
    parser.add_argument('--status', action='store_true',
                        help='Mostra apenas o status do registro')

    args = parser.parse_args()

    app = create_app()
    cleaner = DatabaseCleaner(app)

    if args.status:
        cleaner.get_database_status()
        return

    cleaner.get_database_status()

    if not any([args.all, args.results, args.stage, args.artifacts]):
        parser.print_help()
        return

    print(f"\n🗓️  Data/Hora: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")

    if not args.confirm:
        if not confirm_action("Tem certeza que deseja prosseguir com a limpeza?"):
            print("❌ Operação cancelada pelo usuário")
            return

    print("\n🧹 INICIANDO LIMPEZA")
    print("=" * 50)

    success = True

    if args.all:
        success &= cleaner.clean_all()

    if args.results:
        success &= cleaner.clean_results()

    if args.stage:
        success &= cleaner.clean_stage(args.stage)

    if args.artifacts:
        success &= cleaner.clean_artifacts(args.artifacts)

    print("\n" + "=" * 50)

    if success:
        print("✅ LIMPEZA CONCLUÍDA COM SUCESSO!")
    else:
        print("⚠️  LIMPEZA CONCLUÍDA COM ALGUNS ERROS")

    cleaner.get_database_status()


if __name__ == '__main__':
    main()
