# Pasta de testes unitários
