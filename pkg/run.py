"""Servidor da API de consulta do registro de experimentos"""
import os

from App import create_app

app = create_app({
    'OUT_DIR': os.environ.get('SWARM_SYMREG_OUT_DIR', 'out'),
    'LOG_LEVEL': os.environ.get('SWARM_SYMREG_LOG_LEVEL', 'INFO'),
})

if __name__ == '__main__':
    app.run(debug=True)
