"""
Configuração base para testes unitários
"""
import sys
import os
import pytest
import numpy as np

# Adiciona o diretório raiz ao path para importar módulos
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from App import create_app, db
from App.services.mme import RegressionDataset


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='Executa também os testes de aceitação lentos')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: teste de aceitação lento (use --runslow)')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    pular = pytest.mark.skip(reason='use --runslow para executar')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(pular)


@pytest.fixture
def app(tmp_path):
    """Cria uma instância da aplicação para testes (registro em memória, artefatos em tmp)"""
    app = create_app({
        'TESTING': True,
        'SQLALCHEMY_DATABASE_URI': 'sqlite:///:memory:',
        'OUT_DIR': str(tmp_path / 'out'),
    })

    with app.app_context():
        db.create_all()
        yield app
        db.session.remove()
        db.drop_all()


@pytest.fixture
def client(app):
    """Cliente de teste Flask"""
    return app.test_client()


@pytest.fixture
def runner(app):
    """Runner de comandos CLI para testes"""
    return app.test_cli_runner()


@pytest.fixture
def out_dir(app):
    return app.config['OUT_DIR']


@pytest.fixture
def dataset_inverso():
    """y = 2/x em 40 linhas sem ruído"""
    x = np.linspace(0.5, 4.0, 40)
    return RegressionDataset(x.reshape(-1, 1), 2.0 / x, ['x0'], ['y'])


@pytest.fixture
def dataset_linear():
    """y = 3x em 10 linhas sem ruído"""
    x = np.linspace(0.1, 1.0, 10)
    return RegressionDataset(x.reshape(-1, 1), 3.0 * x, ['x0'], ['y'])
